#pragma once

namespace wmr {

/// Selects the serial reference loop or the OpenMP loop for the per-frame kernels.
/// Both paths write per-frame results into preallocated slots and reduce in frame
/// order, so their outputs are bit-identical.
enum class Exec { Serial, Parallel };

}  // namespace wmr
