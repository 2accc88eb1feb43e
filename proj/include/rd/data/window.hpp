#pragma once

#include <cstdint>
#include <vector>

namespace rd {

struct WindowOptions {
  int window = 128;
  int stride = 64;
  int max_per_doc = 10;
};

// Fixed-length example of window + 2 ids: [CLS] tokens [SEP] [PAD]...
// valid flags every position up to and including [SEP].
struct WindowedExample {
  std::vector<int> tokens;
  std::vector<uint8_t> valid;
};

std::vector<WindowedExample> window_corpus(const std::vector<std::vector<int>>& documents,
                                           const WindowOptions& opts);

}  // namespace rd
