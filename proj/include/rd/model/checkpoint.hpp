#pragma once

#include <map>
#include <string>
#include <vector>

#include "rd/model/params.hpp"

namespace rd {

// Single-file binary checkpoint: magic, format version, key/value header
// (model config plus free-form entries), then named parameter records with
// shape and row-major little-endian doubles. Round-trips bit-exactly.

struct CheckpointData {
  std::string kind;  // "teacher" or "student"
  ModelConfig config;
  std::map<std::string, std::string> extra;  // non-config header entries
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const std::string& kind,
                     const ModelConfig& config, const std::vector<NamedParam>& params,
                     const std::map<std::string, std::string>& extra = {});

void save_checkpoint(const std::string& path, const TeacherModel& model,
                     const std::map<std::string, std::string>& extra = {});
void save_checkpoint(const std::string& path, const RecursiveStudent& model,
                     const std::map<std::string, std::string>& extra = {});

// Throws CorruptArtifactError on any structural problem.
CheckpointData load_checkpoint(const std::string& path);

// Rebuild a model from checkpoint data. Parameter tensors are created with
// requires_grad per `trainable`; a frozen teacher gets no gradient slots.
TeacherModel teacher_from_checkpoint(const CheckpointData& data, bool trainable);
RecursiveStudent student_from_checkpoint(const CheckpointData& data, bool trainable);

}  // namespace rd
