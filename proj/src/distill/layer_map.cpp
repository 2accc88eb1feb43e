#include "rd/distill/layer_map.hpp"

#include "rd/common/errors.hpp"

namespace rd {

LayerMapStrategy layer_map_strategy_from_string(const std::string& s) {
  if (s == "identity") return LayerMapStrategy::kIdentity;
  if (s == "uniform_stride") return LayerMapStrategy::kUniformStride;
  throw ConfigError("unknown layer map strategy: " + s);
}

std::string to_string(LayerMapStrategy s) {
  return s == LayerMapStrategy::kIdentity ? "identity" : "uniform_stride";
}

void LayerMap::validate() const {
  if (student_iterations <= 0 || teacher_layers <= 0) {
    throw ConfigError("layer map needs positive layer counts");
  }
  if (static_cast<int>(mapping.size()) != student_iterations) {
    throw ConfigError("layer map length " + std::to_string(mapping.size()) +
                      " != student iterations " + std::to_string(student_iterations));
  }
  int prev = 0;
  for (int m : mapping) {
    if (m < 1 || m > teacher_layers) {
      throw ConfigError("layer map entry " + std::to_string(m) + " outside [1, " +
                        std::to_string(teacher_layers) + "]");
    }
    if (m <= prev) throw ConfigError("layer map entries must be strictly increasing");
    prev = m;
  }
}

LayerMap build_layer_map(int student_iterations, int teacher_layers,
                         LayerMapStrategy strategy) {
  if (student_iterations > teacher_layers) {
    throw ConfigError("student iterations (" + std::to_string(student_iterations) +
                      ") exceed teacher layers (" + std::to_string(teacher_layers) + ")");
  }
  LayerMap map;
  map.student_iterations = student_iterations;
  map.teacher_layers = teacher_layers;
  if (strategy == LayerMapStrategy::kIdentity) {
    if (student_iterations != teacher_layers) {
      throw ConfigError("identity layer map requires equal layer counts");
    }
    for (int l = 1; l <= student_iterations; ++l) map.mapping.push_back(l);
  } else {
    // l -> ceil(l * L_t / L_s), 1-based.
    for (int l = 1; l <= student_iterations; ++l) {
      map.mapping.push_back((l * teacher_layers + student_iterations - 1) / student_iterations);
    }
  }
  map.validate();
  return map;
}

}  // namespace rd
