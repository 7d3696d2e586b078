#include "lps/core/tensor_io.hpp"

#include <cstring>
#include <sstream>

#include "lps/core/check.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/hash.hpp"

namespace lps {

namespace {
constexpr char kMagic[8] = {'L', 'S', 'C', 'K', 'P', 'T', '0', '1'};

void append_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}
void append_u64(std::string& out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, 8);

  std::string mtext;
  for (const auto& [k, v] : ckpt.manifest) mtext += k + " = " + v + "\n";
  append_u64(out, mtext.size());
  out += mtext;

  append_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    torch::Tensor c = t.contiguous().to(torch::kFloat32);
    append_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    append_u32(out, static_cast<uint32_t>(c.dim()));
    for (int64_t d = 0; d < c.dim(); ++d) append_u64(out, static_cast<uint64_t>(c.size(d)));
    const size_t bytes = static_cast<size_t>(c.numel()) * sizeof(float);
    out.append(reinterpret_cast<const char*>(c.data_ptr<float>()), bytes);
  }
  atomic_write_bytes(path, out.data(), out.size());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto buf = read_bytes(path);
  LPS_CHECK(buf.size() >= 8 && std::memcmp(buf.data(), kMagic, 8) == 0,
            "not a checkpoint file: " + path.string());
  size_t pos = 8;
  auto need = [&](size_t n) {
    LPS_CHECK(pos + n <= buf.size(), "truncated checkpoint: " + path.string());
  };
  auto read_u32 = [&]() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  };
  auto read_u64 = [&]() {
    need(8);
    uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  };

  Checkpoint ckpt;
  const uint64_t mlen = read_u64();
  need(mlen);
  std::istringstream ms(std::string(buf.data() + pos, mlen));
  pos += mlen;
  std::string line;
  while (std::getline(ms, line)) {
    const size_t eq = line.find(" = ");
    if (eq != std::string::npos) ckpt.manifest[line.substr(0, eq)] = line.substr(eq + 3);
  }

  const uint32_t count = read_u32();
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32();
    need(name_len);
    std::string name(buf.data() + pos, name_len);
    pos += name_len;
    const uint32_t ndim = read_u32();
    std::vector<int64_t> dims(ndim);
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      dims[d] = static_cast<int64_t>(read_u64());
      numel *= dims[d];
    }
    const size_t bytes = static_cast<size_t>(numel) * sizeof(float);
    need(bytes);
    torch::Tensor t = torch::empty(dims, torch::kFloat32);
    std::memcpy(t.data_ptr<float>(), buf.data() + pos, bytes);
    pos += bytes;
    ckpt.tensors[name] = t;
  }
  return ckpt;
}

std::map<std::string, torch::Tensor> named_tensors(const torch::nn::Module& m) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : m.named_parameters()) out[p.key()] = p.value().detach().clone();
  for (const auto& b : m.named_buffers()) out[b.key()] = b.value().detach().clone();
  return out;
}

void load_named_tensors(torch::nn::Module& m, const std::map<std::string, torch::Tensor>& t,
                        const std::string& prefix) {
  torch::NoGradGuard ng;
  for (auto& p : m.named_parameters()) {
    auto it = t.find(prefix + p.key());
    LPS_CHECK(it != t.end(), "checkpoint missing tensor: " + prefix + p.key());
    LPS_CHECK(it->second.sizes() == p.value().sizes(),
              "checkpoint shape mismatch for " + prefix + p.key());
    p.value().copy_(it->second);
  }
  for (auto& b : m.named_buffers()) {
    auto it = t.find(prefix + b.key());
    if (it != t.end()) b.value().copy_(it->second);
  }
}

uint64_t parameter_hash(const torch::nn::Module& m) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : m.named_parameters()) {
    h = fnv1a64(p.key(), h);
    torch::Tensor c = p.value().detach().contiguous();
    h = fnv1a64(c.data_ptr(), static_cast<size_t>(c.numel()) * c.element_size(), h);
  }
  return h;
}

}  // namespace lps
