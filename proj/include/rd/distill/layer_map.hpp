#pragma once

#include <string>
#include <vector>

namespace rd {

enum class LayerMapStrategy { kIdentity, kUniformStride };

LayerMapStrategy layer_map_strategy_from_string(const std::string& s);
std::string to_string(LayerMapStrategy s);

// Assignment of each student iteration to a teacher layer, 1-based and
// strictly increasing.
struct LayerMap {
  int student_iterations = 0;
  int teacher_layers = 0;
  std::vector<int> mapping;

  void validate() const;  // throws ConfigError on a malformed map
};

LayerMap build_layer_map(int student_iterations, int teacher_layers,
                         LayerMapStrategy strategy);

}  // namespace rd
