#pragma once

#include <cstdint>

#include "rd/eval/head.hpp"

namespace rd {

// Balanced binary task: label 1 iff any token from a small planted keyword
// set appears among distractor tokens.
TaskDataset synthetic_classification(int num_examples, int vocab_size, int seq_len,
                                     uint64_t seed);

// BIO tagging task: tokens from a planted sublexicon form entities; runs of
// sublexicon tokens are tagged B-ENT, I-ENT..., everything else O.
TaskDataset synthetic_tagging(int num_examples, int vocab_size, int seq_len, uint64_t seed);

}  // namespace rd
