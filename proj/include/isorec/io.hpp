#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>

#include "isorec/denoiser.hpp"
#include "isorec/grid.hpp"
#include "isorec/sampler.hpp"
#include "isorec/tiny_denoiser.hpp"

namespace isorec {

// Volume container, little-endian:
//   "ISOV" | u16 version | u8 dtype | u32 z | u32 y | u32 x | payload
// dtype 0 = float32, 1 = uint8 (mapped through the canonical range transform).
inline constexpr std::uint16_t kVolumeVersion = 1;
inline constexpr std::size_t kVolumeHeaderBytes = 19;

enum class VolumeDtype : std::uint8_t { float32 = 0, uint8 = 1 };

Volume3D read_volume(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const Volume3D& vol, VolumeDtype dtype = VolumeDtype::float32);

/// Headerless uint8 volume with a sidecar "<path>.dims" text file holding "z y x".
Volume3D import_raw_u8(const std::filesystem::path& path);

/// Binary PGM (P5), maxval 255, canonical range mapped with clamping.
void export_slice_pgm(const Image2D& img, const std::filesystem::path& path);
Image2D import_slice_pgm(const std::filesystem::path& path);

// Checkpoint:
//   "ISOC" | u16 version | u32 header length | JSON header |
//   u32 record count | records: u16 name length, name, u8 rank, u32 dims[rank],
//   float32 payload, u32 crc32 of (name .. payload)
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Either a trained convolutional model or an analytic Gaussian oracle.
using StoredModel = std::variant<TinyDenoiser, AnalyticGaussianDenoiser>;

void store_checkpoint(const std::filesystem::path& path, const TinyDenoiser& model);
void store_checkpoint(const std::filesystem::path& path, const AnalyticGaussianDenoiser& model);

StoredModel load_checkpoint(const std::filesystem::path& path);
/// Loads a convolutional model and checks it against the expected architecture.
TinyDenoiser load_tiny_checkpoint(const std::filesystem::path& path, const TinyArch* expected = nullptr);

std::unique_ptr<Denoiser> load_denoiser(const std::filesystem::path& path);

std::string report_json(const ReconstructionReport& report);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace isorec
