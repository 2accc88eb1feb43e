#include "rd/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "rd/common/errors.hpp"

namespace rd {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw CorruptArtifactError("truncated checkpoint");
  return v;
}

uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw CorruptArtifactError("truncated checkpoint");
  return v;
}

std::string read_string(std::istream& is) {
  const uint32_t len = read_u32(is);
  if (len > (1u << 20)) throw CorruptArtifactError("implausible string length in checkpoint");
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) throw CorruptArtifactError("truncated checkpoint");
  return s;
}

// Fills a freshly initialized model's tensors from the checkpoint map.
void fill_params(const std::vector<NamedParam>& params, const CheckpointData& data) {
  std::size_t used = 0;
  for (const auto& p : params) {
    auto it = data.tensors.find(p.name);
    if (it == data.tensors.end()) {
      throw CorruptArtifactError("checkpoint missing parameter: " + p.name);
    }
    if (it->second.shape() != p.tensor.shape()) {
      throw CorruptArtifactError("checkpoint shape mismatch for " + p.name);
    }
    Tensor dst = p.tensor;
    std::copy(it->second.data(), it->second.data() + it->second.numel(), dst.data());
    ++used;
  }
  if (used != data.tensors.size()) {
    throw CorruptArtifactError("checkpoint contains unexpected extra parameters");
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const ModelConfig& config, const std::vector<NamedParam>& params,
                     const std::map<std::string, std::string>& extra) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  write_u32(os, kVersion);

  std::map<std::string, std::string> kv = config.to_kv();
  kv["kind"] = kind;
  for (const auto& [k, v] : extra) kv[k] = v;
  write_u32(os, static_cast<uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    write_string(os, k);
    write_string(os, v);
  }

  write_u64(os, params.size());
  for (const auto& p : params) {
    write_string(os, p.name);
    write_u32(os, static_cast<uint32_t>(p.tensor.ndim()));
    for (int i = 0; i < p.tensor.ndim(); ++i) write_u64(os, static_cast<uint64_t>(p.tensor.dim(i)));
    os.write(reinterpret_cast<const char*>(p.tensor.data()),
             static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

void save_checkpoint(const std::string& path, const TeacherModel& model,
                     const std::map<std::string, std::string>& extra) {
  save_checkpoint(path, "teacher", model.config, collect_params(model), extra);
}

void save_checkpoint(const std::string& path, const RecursiveStudent& model,
                     const std::map<std::string, std::string>& extra) {
  save_checkpoint(path, "student", model.config, collect_params(model), extra);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptArtifactError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw CorruptArtifactError("bad checkpoint magic: " + path);
  }
  const uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw CorruptArtifactError("unsupported checkpoint version " + std::to_string(version));
  }

  CheckpointData data;
  std::map<std::string, std::string> kv;
  const uint32_t nkv = read_u32(is);
  for (uint32_t i = 0; i < nkv; ++i) {
    std::string k = read_string(is);
    kv[k] = read_string(is);
  }
  auto kind_it = kv.find("kind");
  if (kind_it == kv.end()) throw CorruptArtifactError("checkpoint header missing kind");
  data.kind = kind_it->second;
  try {
    data.config = ModelConfig::from_kv(kv);
  } catch (const ConfigError& e) {
    throw CorruptArtifactError(std::string("invalid config in checkpoint: ") + e.what());
  }
  for (const auto& [k, v] : kv) {
    if (k != "kind" && data.config.to_kv().count(k) == 0) data.extra[k] = v;
  }

  const uint64_t nparams = read_u64(is);
  if (nparams > (1u << 20)) throw CorruptArtifactError("implausible parameter count");
  for (uint64_t i = 0; i < nparams; ++i) {
    std::string name = read_string(is);
    const uint32_t ndim = read_u32(is);
    if (ndim > 8) throw CorruptArtifactError("implausible tensor rank for " + name);
    Shape shape;
    for (uint32_t j = 0; j < ndim; ++j) {
      const uint64_t d = read_u64(is);
      if (d == 0 || d > (1u << 26)) throw CorruptArtifactError("implausible dim for " + name);
      shape.push_back(static_cast<int>(d));
    }
    Tensor t = Tensor::zeros(shape);
    if (!is.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(double)))) {
      throw CorruptArtifactError("truncated tensor data for " + name);
    }
    data.tensors.emplace(std::move(name), std::move(t));
  }
  return data;
}

TeacherModel teacher_from_checkpoint(const CheckpointData& data, bool trainable) {
  if (data.kind != "teacher") {
    throw CorruptArtifactError("expected a teacher checkpoint, found kind=" + data.kind);
  }
  std::mt19937_64 rng(0);  // values are overwritten below
  TeacherModel model = init_teacher(data.config, rng);
  auto params = collect_params(model);
  fill_params(params, data);
  if (!trainable) set_requires_grad_all(params, false);
  return model;
}

RecursiveStudent student_from_checkpoint(const CheckpointData& data, bool trainable) {
  if (data.kind != "student") {
    throw CorruptArtifactError("expected a student checkpoint, found kind=" + data.kind);
  }
  std::mt19937_64 rng(0);
  RecursiveStudent model = init_student(data.config, rng);
  auto params = collect_params(model);
  fill_params(params, data);
  if (!trainable) set_requires_grad_all(params, false);
  return model;
}

}  // namespace rd
