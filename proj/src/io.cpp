#include "isorec/io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <json.hpp>
#include <zlib.h>

#include "isorec/error.hpp"

namespace isorec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string(), 0, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    void text(std::string_view s) { out_.append(s); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

    std::size_t size() const noexcept { return out_.size(); }
    const std::string& str() const noexcept { return out_; }

private:
    std::string out_;
};

class ByteReader {
public:
    ByteReader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    const std::string& data() const noexcept { return data_; }

    [[noreturn]] void fail(const std::string& what) const { throw FormatError(path_, pos_, what); }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            fail(std::string("truncated ") + what + ": expected " + std::to_string(n) + " bytes, found " +
                 std::to_string(remaining()));
        }
    }
    std::string take(std::size_t n, const char* what) {
        need(n, what);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_++]) << (8 * i));
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
        return v;
    }
    double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }

private:
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::string& bytes, std::size_t begin, std::size_t end) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data() + begin), static_cast<uInt>(end - begin)));
}

void write_tensor(ByteWriter& w, const std::string& name, const std::vector<std::size_t>& shape,
                  std::span<const double> values) {
    const std::size_t begin = w.size();
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : values) w.f32(v);
    w.u32(crc_of(w.str(), begin, w.size()));
}

struct TensorRecord {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

TensorRecord read_tensor(ByteReader& r) {
    const std::size_t begin = r.offset();
    TensorRecord rec;
    const auto name_len = r.u16("tensor name length");
    rec.name = r.take(name_len, "tensor name");
    const auto rank = r.u8("tensor rank");
    std::size_t count = 1;
    for (int i = 0; i < rank; ++i) {
        rec.shape.push_back(r.u32("tensor dims"));
        count *= rec.shape.back();
    }
    r.need(count * 4, "tensor payload");
    rec.values.resize(count);
    for (auto& v : rec.values) v = r.f32("tensor payload");
    const std::uint32_t expected = crc_of(r.data(), begin, r.offset());
    if (r.u32("tensor checksum") != expected) r.fail("checksum mismatch in tensor record '" + rec.name + "'");
    return rec;
}

std::string checkpoint_bytes(const json& header, const std::vector<TensorRecord>& tensors) {
    ByteWriter w;
    w.text("ISOC");
    w.u16(kCheckpointVersion);
    const std::string text = header.dump();
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.text(text);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) write_tensor(w, t.name, t.shape, t.values);
    return w.str();
}

json training_json(const TrainingRecord& rec) {
    return {{"seed", rec.seed},
            {"steps", rec.steps},
            {"final_loss", rec.final_loss},
            {"optimizer", rec.optimizer},
            {"learning_rate", rec.learning_rate},
            {"momentum", rec.momentum},
            {"batch_size", rec.batch_size}};
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." +
           std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xffffffu);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

void write_volume(const fs::path& path, const Volume3D& vol, VolumeDtype dtype) {
    require_finite(vol, "write_volume");
    ByteWriter w;
    w.text("ISOV");
    w.u16(kVolumeVersion);
    w.u8(static_cast<std::uint8_t>(dtype));
    w.u32(static_cast<std::uint32_t>(vol.depth()));
    w.u32(static_cast<std::uint32_t>(vol.height()));
    w.u32(static_cast<std::uint32_t>(vol.width()));
    for (double v : vol.data()) {
        if (dtype == VolumeDtype::float32) {
            w.f32(v);
        } else {
            w.u8(to_u8(v));
        }
    }
    write_file_atomic(path, w.str());
}

Volume3D read_volume(const fs::path& path) {
    ByteReader r(read_all(path), path.string());
    if (r.take(4 > r.remaining() ? r.remaining() : 4, "magic") != "ISOV") {
        throw FormatError(path.string(), 0, "bad magic (expected ISOV)");
    }
    const std::size_t version_at = r.offset();
    const auto version = r.u16("version");
    if (version != kVolumeVersion) {
        throw FormatError(path.string(), version_at, "unsupported version " + std::to_string(version));
    }
    const std::size_t dtype_at = r.offset();
    const auto dtype = r.u8("dtype");
    if (dtype > 1) throw FormatError(path.string(), dtype_at, "unknown dtype code " + std::to_string(dtype));
    const std::size_t z = r.u32("dims"), y = r.u32("dims"), x = r.u32("dims");
    if (z == 0 || y == 0 || x == 0) throw FormatError(path.string(), r.offset(), "zero dimension");
    const std::size_t elem = dtype == 0 ? 4 : 1;
    const std::size_t expected = z * y * x * elem;
    if (r.remaining() != expected) {
        r.fail("payload length mismatch: expected " + std::to_string(expected) + " bytes, found " +
               std::to_string(r.remaining()));
    }
    std::vector<double> data(z * y * x);
    for (auto& v : data) v = dtype == 0 ? r.f32("payload") : from_u8(r.u8("payload"));
    if (!all_finite(data)) throw FormatError(path.string(), kVolumeHeaderBytes, "non-finite payload values");
    return Volume3D(z, y, x, std::move(data));
}

Volume3D import_raw_u8(const fs::path& path) {
    fs::path dims_path = path;
    dims_path += ".dims";
    std::ifstream dims(dims_path);
    std::size_t z = 0, y = 0, x = 0;
    if (!(dims >> z >> y >> x) || z == 0 || y == 0 || x == 0) {
        throw FormatError(dims_path.string(), 0, "expected three positive integers 'z y x'");
    }
    const std::string bytes = read_all(path);
    if (bytes.size() != z * y * x) {
        throw FormatError(path.string(), bytes.size(),
                          "raw payload length mismatch: expected " + std::to_string(z * y * x) + " bytes, found " +
                              std::to_string(bytes.size()));
    }
    std::vector<double> data(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) data[i] = from_u8(static_cast<unsigned char>(bytes[i]));
    return Volume3D(z, y, x, std::move(data));
}

void export_slice_pgm(const Image2D& img, const fs::path& path) {
    require_finite(img, "export_slice_pgm");
    std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    out.reserve(out.size() + img.size());
    for (double v : img.data()) out.push_back(static_cast<char>(to_u8(v)));
    write_file_atomic(path, out);
}

Image2D import_slice_pgm(const fs::path& path) {
    const std::string bytes = read_all(path);
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) -> void { throw FormatError(path.string(), pos, what); };
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&]() -> std::size_t {
        skip_space();
        const std::size_t start = pos;
        std::size_t v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
            ++pos;
        }
        if (pos == start) fail("expected a number in the PGM header");
        return v;
    };
    if (bytes.compare(0, 2, "P5") != 0) fail("not a binary PGM (missing P5 magic)");
    pos = 2;
    const std::size_t width = number();
    const std::size_t height = number();
    const std::size_t maxval = number();
    if (width == 0 || height == 0) fail("zero image dimension");
    if (maxval != 255) fail("only maxval 255 is supported");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        fail("missing whitespace after the PGM header");
    }
    ++pos;
    if (bytes.size() - pos != width * height) {
        fail("pixel payload length mismatch: expected " + std::to_string(width * height) + " bytes, found " +
             std::to_string(bytes.size() - pos));
    }
    Image2D img(height, width);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = from_u8(static_cast<unsigned char>(bytes[pos + i]));
    return img;
}

void store_checkpoint(const fs::path& path, const TinyDenoiser& model) {
    const auto& rec = model.record;
    json header = {
        {"format", "isorec-checkpoint"},
        {"architecture",
         {{"kind", model.kind()},
          {"channels", model.arch().channels},
          {"blocks", model.arch().blocks},
          {"embed_dim", model.arch().embed_dim},
          {"parameters", model.parameter_count()}}},
        {"schedule",
         {{"family", rec.schedule_family},
          {"steps", rec.schedule_steps},
          {"beta_start", rec.beta_start},
          {"beta_end", rec.beta_end}}},
        {"input_range", {-1.0, 1.0}},
        {"training", training_json(rec)}};
    std::vector<TensorRecord> tensors;
    const auto params = model.parameters();
    for (const auto& slot : model.tensors()) {
        tensors.push_back({slot.name, slot.shape,
                           std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(slot.offset),
                                               params.begin() + static_cast<std::ptrdiff_t>(slot.offset + slot.size))});
    }
    write_file_atomic(path, checkpoint_bytes(header, tensors));
}

void store_checkpoint(const fs::path& path, const AnalyticGaussianDenoiser& model) {
    const auto& spec = model.spec();
    json header = {{"format", "isorec-checkpoint"},
                   {"architecture",
                    {{"kind", model.kind()},
                     {"height", spec.height},
                     {"width", spec.width},
                     {"covariance", spec.is_full() ? "full" : "diagonal"}}}};
    std::vector<TensorRecord> tensors;
    tensors.push_back({"mean", {spec.height, spec.width}, spec.mean});
    if (spec.is_full()) {
        tensors.push_back({"covariance", {spec.pixels(), spec.pixels()}, *spec.covariance});
    } else {
        tensors.push_back({"variance", {spec.height, spec.width}, spec.variance});
    }
    write_file_atomic(path, checkpoint_bytes(header, tensors));
}

StoredModel load_checkpoint(const fs::path& path) {
    ByteReader r(read_all(path), path.string());
    if (r.remaining() < 4 || r.take(4, "magic") != "ISOC") throw FormatError(path.string(), 0, "bad magic (expected ISOC)");
    const std::size_t version_at = r.offset();
    if (const auto version = r.u16("version"); version != kCheckpointVersion) {
        throw FormatError(path.string(), version_at, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto header_len = r.u32("header length");
    const std::size_t header_at = r.offset();
    json header;
    try {
        header = json::parse(r.take(header_len, "header"));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string(), header_at, std::string("malformed header: ") + e.what());
    }
    const auto count = r.u32("record count");
    std::vector<TensorRecord> records;
    for (std::uint32_t i = 0; i < count; ++i) records.push_back(read_tensor(r));
    if (r.remaining() != 0) r.fail("trailing bytes after the last tensor record");

    auto find = [&](const std::string& name) -> const TensorRecord& {
        for (const auto& rec : records) {
            if (rec.name == name) return rec;
        }
        throw IncompatibleCheckpoint(path.string() + ": missing tensor '" + name + "'");
    };

    try {
        const auto& arch_json = header.at("architecture");
        const std::string kind = arch_json.at("kind");
        if (kind == "analytic_gaussian") {
            const std::size_t h = arch_json.at("height"), w = arch_json.at("width");
            const bool full = arch_json.at("covariance") == "full";
            const auto& mean = find("mean").values;
            GaussianDataSpec spec = full ? GaussianDataSpec::full(h, w, mean, find("covariance").values)
                                         : GaussianDataSpec::diagonal(h, w, mean, find("variance").values);
            return AnalyticGaussianDenoiser(std::move(spec));
        }
        if (kind != "tiny_conv") throw IncompatibleCheckpoint(path.string() + ": unknown model kind '" + kind + "'");

        TinyArch arch{arch_json.at("channels"), arch_json.at("blocks"), arch_json.at("embed_dim")};
        TinyDenoiser model(arch);
        if (records.size() != model.tensors().size()) {
            throw IncompatibleCheckpoint(path.string() + ": tensor count does not match " + arch.describe());
        }
        auto params = model.parameters();
        for (const auto& slot : model.tensors()) {
            const auto& rec = find(slot.name);
            if (rec.shape != slot.shape) {
                throw IncompatibleCheckpoint(path.string() + ": tensor '" + slot.name + "' has the wrong shape");
            }
            std::copy(rec.values.begin(), rec.values.end(), params.begin() + static_cast<std::ptrdiff_t>(slot.offset));
        }
        const auto& sched = header.at("schedule");
        const auto& train = header.at("training");
        model.record.schedule_family = sched.at("family");
        model.record.schedule_steps = sched.at("steps");
        model.record.beta_start = sched.at("beta_start");
        model.record.beta_end = sched.at("beta_end");
        model.record.seed = train.at("seed");
        model.record.steps = train.at("steps");
        model.record.final_loss = train.at("final_loss");
        model.record.optimizer = train.at("optimizer");
        model.record.learning_rate = train.at("learning_rate");
        model.record.momentum = train.at("momentum");
        model.record.batch_size = train.at("batch_size");
        return model;
    } catch (const json::exception& e) {
        throw FormatError(path.string(), header_at, std::string("incomplete header: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw IncompatibleCheckpoint(path.string() + ": " + e.what());
    }
}

TinyDenoiser load_tiny_checkpoint(const fs::path& path, const TinyArch* expected) {
    StoredModel stored = load_checkpoint(path);
    auto* tiny = std::get_if<TinyDenoiser>(&stored);
    if (tiny == nullptr) throw IncompatibleCheckpoint(path.string() + ": not a convolutional model checkpoint");
    if (expected != nullptr && !(tiny->arch() == *expected)) {
        throw IncompatibleCheckpoint(path.string() + ": architecture " + tiny->arch().describe() + " does not match " +
                                     expected->describe());
    }
    return std::move(*tiny);
}

std::unique_ptr<Denoiser> load_denoiser(const fs::path& path) {
    return std::visit([](auto&& m) -> std::unique_ptr<Denoiser> {
        return std::make_unique<std::decay_t<decltype(m)>>(std::move(m));
    }, load_checkpoint(path));
}

std::string report_json(const ReconstructionReport& report) {
    json j = {{"alpha", report.alpha},
              {"axes", report.axes},
              {"model_kind", report.model_kind},
              {"plan_steps", report.plan_steps},
              {"steps", report.plan_steps.size()},
              {"refine", report.refine},
              {"total_steps_per_slice", report.total_steps_per_slice},
              {"sigma_mode", report.sigma_mode},
              {"sscs_period", report.sscs_period},
              {"final_clamp", report.final_clamp},
              {"clip_x0", report.clip_x0},
              {"seed", report.seed},
              {"planes", report.planes},
              {"denoiser_calls", report.denoiser_calls},
              {"seconds", report.seconds},
              {"input_dims", report.input_dims},
              {"output_dims", report.output_dims}};
    return j.dump(2) + "\n";
}

}  // namespace isorec
