#include "rd/data/window.hpp"

#include "rd/common/errors.hpp"
#include "rd/data/vocab.hpp"

namespace rd {

std::vector<WindowedExample> window_corpus(const std::vector<std::vector<int>>& documents,
                                           const WindowOptions& opts) {
  if (opts.stride <= 0 || opts.window <= opts.stride) {
    throw ConfigError("window_corpus: requires window > stride > 0");
  }
  if (opts.max_per_doc <= 0) throw ConfigError("window_corpus: max_per_doc must be positive");

  std::vector<WindowedExample> out;
  const std::size_t total = static_cast<std::size_t>(opts.window) + 2;
  for (const auto& doc : documents) {
    const long long len = static_cast<long long>(doc.size());
    for (int k = 0; k < opts.max_per_doc; ++k) {
      const long long start = static_cast<long long>(k) * opts.stride;
      // Emit while the window still covers unseen tokens; the first window
      // always exists, padded when the document is short.
      if (k > 0 && start >= len - opts.window + opts.stride) break;

      WindowedExample ex;
      ex.tokens.reserve(total);
      ex.tokens.push_back(Vocabulary::kCls);
      for (long long i = start; i < std::min<long long>(len, start + opts.window); ++i) {
        ex.tokens.push_back(doc[static_cast<std::size_t>(i)]);
      }
      ex.tokens.push_back(Vocabulary::kSep);
      ex.valid.assign(ex.tokens.size(), 1);
      ex.tokens.resize(total, Vocabulary::kPad);
      ex.valid.resize(total, 0);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace rd
