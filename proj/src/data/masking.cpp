#include "rd/data/masking.hpp"

#include <random>

#include "rd/common/errors.hpp"
#include "rd/data/vocab.hpp"
#include "rd/numerics/rng.hpp"

namespace rd {

void MaskingOptions::validate() const {
  if (p_mask < 0.0 || p_mask > 1.0) throw ConfigError("p_mask must be in [0, 1]");
  if (mask_frac < 0.0 || random_frac < 0.0 || mask_frac + random_frac > 1.0) {
    throw ConfigError("masking split fractions must be nonnegative and sum to at most 1");
  }
}

MaskedRow apply_mlm_masking(const std::vector<int>& sequence, int vocab_size,
                            const MaskingOptions& opts, uint64_t seed,
                            uint64_t sequence_index) {
  opts.validate();
  if (vocab_size <= Vocabulary::kNumReserved) {
    throw ConfigError("apply_mlm_masking: vocabulary has no maskable tokens");
  }
  MaskedRow row;
  row.tokens = sequence;
  row.labels.assign(sequence.size(), DistillBatch::kLabelNone);
  row.mask.assign(sequence.size(), 0);

  auto rng = make_rng(seed, "mlm-mask", sequence_index);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<int> random_token(Vocabulary::kNumReserved, vocab_size - 1);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const int tok = sequence[i];
    if (Vocabulary::is_reserved(tok)) continue;
    if (uniform(rng) >= opts.p_mask) continue;
    row.labels[i] = tok;
    row.mask[i] = 1;
    if (opts.all_mask) {
      row.tokens[i] = Vocabulary::kMask;
      continue;
    }
    const double roll = uniform(rng);
    if (roll < opts.mask_frac) {
      row.tokens[i] = Vocabulary::kMask;
    } else if (roll < opts.mask_frac + opts.random_frac) {
      row.tokens[i] = random_token(rng);
    }  // else: keep the original token, label still set
  }
  return row;
}

DistillBatch assemble_batch(const std::vector<WindowedExample>& examples, std::size_t begin,
                            std::size_t count, int vocab_size, const MaskingOptions& opts,
                            uint64_t seed) {
  if (count == 0 || begin + count > examples.size()) {
    throw ConfigError("assemble_batch: example range out of bounds");
  }
  DistillBatch batch;
  batch.batch = static_cast<int>(count);
  batch.seq = static_cast<int>(examples[begin].tokens.size());
  for (std::size_t i = 0; i < count; ++i) {
    const WindowedExample& ex = examples[begin + i];
    if (static_cast<int>(ex.tokens.size()) != batch.seq) {
      throw ConfigError("assemble_batch: ragged example lengths");
    }
    MaskedRow row = apply_mlm_masking(ex.tokens, vocab_size, opts, seed, begin + i);
    batch.tokens.insert(batch.tokens.end(), row.tokens.begin(), row.tokens.end());
    batch.labels.insert(batch.labels.end(), row.labels.begin(), row.labels.end());
    batch.mask.insert(batch.mask.end(), row.mask.begin(), row.mask.end());
    batch.valid.insert(batch.valid.end(), ex.valid.begin(), ex.valid.end());
  }
  return batch;
}

}  // namespace rd
