#pragma once

#include <cstdint>
#include <vector>

namespace rd {

// One MLM training batch, flattened row-major over [batch, seq].
// tokens holds corrupted input ids; labels holds original ids at masked
// positions and kLabelNone elsewhere; mask mirrors labels as 0/1; valid
// marks non-padding positions for attention and loss averaging.
struct DistillBatch {
  int batch = 0;
  int seq = 0;
  std::vector<int> tokens;
  std::vector<int> labels;
  std::vector<uint8_t> mask;
  std::vector<uint8_t> valid;

  static constexpr int kLabelNone = -1;
};

}  // namespace rd
