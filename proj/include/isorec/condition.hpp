#pragma once

#include "isorec/grid.hpp"

namespace isorec {

/// Sparse axial condition: the low-resolution slice spread onto the
/// high-resolution row grid, plus the row mask of known pixels.
struct ConditionPair {
    Image2D x_con_0;  // source rows at k * alpha, zero elsewhere
    Image2D mask;     // 1 on source rows, 0 on inserted rows
    int alpha = 1;

    /// Throws InvalidArgument if the mask/payload invariants do not hold.
    void validate() const;
};

/// Inserts alpha - 1 zero rows after every source row. Output height is h * alpha.
ConditionPair pad_axial(const Image2D& x_axi, int alpha);

/// Gathers rows k * alpha back into a low-resolution slice.
Image2D unpad_axial(const ConditionPair& pair);

/// Mean of alpha consecutive voxels along z. Depth must be divisible by alpha.
Volume3D downsample_axial(const Volume3D& vol, int alpha);

/// Row-pooling of a single axial slice; same contract as downsample_axial.
Image2D downsample_rows(const Image2D& img, int alpha);

/// Nearest-row upsampling (each low-resolution row repeated alpha times).
Image2D replicate_rows(const Image2D& img, int alpha);

}  // namespace isorec
