#include "wstan/autodiff/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "wstan/error.hpp"

namespace wstan::ad {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return &v;
  return nullptr;
}

const Tensor* Checkpoint::find_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.tensor;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out << kCheckpointHeader << '\n';
  for (const auto& [k, v] : ckpt.meta) out << "meta " << k << ' ' << v << '\n';
  for (const auto& [name, t] : ckpt.tensors) {
    out << "tensor " << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    const auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out << ' ';
      out << format_double(values[i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointHeader)
    throw DataError(path.string() + ": not a " + kCheckpointHeader + " file");

  Checkpoint ckpt;
  std::size_t line_no = 1;
  auto fail = [&](const std::string& what) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta.emplace_back(key, value);
    } else if (kind == "tensor") {
      std::string name;
      std::size_t rank = 0;
      if (!(ls >> name >> rank) || rank == 0) fail("bad tensor header");
      Shape shape(rank);
      for (auto& d : shape)
        if (!(ls >> d) || d == 0) fail("bad tensor shape");
      std::string values_line;
      if (!std::getline(in, values_line)) fail("missing values for " + name);
      ++line_no;
      std::vector<double> values;
      values.reserve(numel(shape));
      const char* p = values_line.c_str();
      char* end = nullptr;
      for (std::size_t i = 0; i < numel(shape); ++i) {
        const double v = std::strtod(p, &end);
        if (end == p) fail("expected " + std::to_string(numel(shape)) +
                           " values for " + name);
        values.push_back(v);
        p = end;
      }
      while (*p == ' ') ++p;
      if (*p != '\0') fail("trailing data after values of " + name);
      ckpt.tensors.push_back({name, Tensor(std::move(shape), std::move(values))});
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, std::span<NamedTensor> params) {
  for (auto& p : params) {
    const Tensor* src = ckpt.find_tensor(p.name);
    if (!src) throw DataError("checkpoint is missing tensor '" + p.name + "'");
    if (src->shape() != p.tensor.shape())
      throw DataError("checkpoint tensor '" + p.name + "' has shape " +
                      shape_string(src->shape()) + ", model expects " +
                      shape_string(p.tensor.shape()));
    auto dst = p.tensor.mutable_values();
    std::copy(src->values().begin(), src->values().end(), dst.begin());
  }
}

}  // namespace wstan::ad
