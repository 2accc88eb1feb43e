#pragma once

#include <cstdint>
#include <vector>

#include "rd/data/batch.hpp"
#include "rd/data/window.hpp"

namespace rd {

struct MaskingOptions {
  double p_mask = 0.15;
  // Corruption split over selected positions; the remainder stays unchanged.
  double mask_frac = 0.8;
  double random_frac = 0.1;
  // Test mode: every selected position becomes [MASK] regardless of split.
  bool all_mask = false;

  void validate() const;  // throws ConfigError
};

struct MaskedRow {
  std::vector<int> tokens;
  std::vector<int> labels;  // original ids at selected positions, else sentinel
  std::vector<uint8_t> mask;
};

// Deterministic per (seed, sequence_index); reserved ids are never selected.
MaskedRow apply_mlm_masking(const std::vector<int>& sequence, int vocab_size,
                            const MaskingOptions& opts, uint64_t seed,
                            uint64_t sequence_index);

// Masks examples [begin, begin + count) into one batch; rows keep their
// corpus index as the masking stream index, so batch composition does not
// change per-row corruption.
DistillBatch assemble_batch(const std::vector<WindowedExample>& examples, std::size_t begin,
                            std::size_t count, int vocab_size, const MaskingOptions& opts,
                            uint64_t seed);

}  // namespace rd
