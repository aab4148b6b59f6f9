#include "msinr/checkpoint.hpp"

#include "msinr/error.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace msinr {
namespace {

constexpr char kMagic[6] = {'M', 'S', 'I', 'N', 'R', '1'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out_.insert(out_.end(), raw, raw + sizeof(T));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  std::size_t size() const { return out_.size(); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <class T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("checkpoint truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t narrow32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw ConfigError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const auto& a = ckpt.arch;
  const std::size_t d = param_count(a);
  if (ckpt.params.size() != d) throw DimensionError("checkpoint params do not match architecture");
  const Mask reference = full_mask(a);
  if (ckpt.mask.prunable_map() != reference.prunable_map() ||
      ckpt.mask.param_count() != reference.param_count())
    throw DimensionError("checkpoint mask does not match architecture");

  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(a.kind));
  w.put<std::uint8_t>(a.prune_biases ? 1 : 0);
  w.put(narrow32(a.in_dim, "in_dim"));
  w.put(narrow32(a.out_dim, "out_dim"));
  w.put(narrow32(a.width, "width"));
  w.put(narrow32(a.hidden_layers, "hidden_layers"));
  w.put(narrow32(a.fourier_dim, "fourier_dim"));
  w.put<double>(a.omega0);
  w.put<double>(a.sigma);
  w.put(narrow32(a.omega_overrides.size(), "omega_overrides"));
  for (double o : a.omega_overrides) w.put<double>(o);
  w.put<std::uint64_t>(a.seed);

  w.put<std::uint64_t>(d);
  for (Eigen::Index i = 0; i < ckpt.params.values.size(); ++i)
    w.put<float>(static_cast<float>(ckpt.params.values[i]));

  const auto n = ckpt.mask.prunable_count();
  w.put<std::uint64_t>(n);
  std::vector<std::uint8_t> packed((n + 7) / 8, 0);
  for (std::size_t k = 0; k < n; ++k)
    if (ckpt.mask.kept(k)) packed[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  w.bytes(packed.data(), packed.size());

  w.put<std::uint64_t>(w.size());
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.bytes(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint (bad magic)");

  Checkpoint c;
  auto& a = c.arch;
  const auto kind = r.get<std::uint8_t>();
  if (kind > 1) throw DataError("checkpoint has unknown architecture kind");
  a.kind = static_cast<ArchKind>(kind);
  const auto flags = r.get<std::uint8_t>();
  if (flags > 1) throw DataError("checkpoint has unknown flags");
  a.prune_biases = (flags & 1) != 0;
  a.in_dim = r.get<std::uint32_t>();
  a.out_dim = r.get<std::uint32_t>();
  a.width = r.get<std::uint32_t>();
  a.hidden_layers = r.get<std::uint32_t>();
  a.fourier_dim = r.get<std::uint32_t>();
  a.omega0 = r.get<double>();
  a.sigma = r.get<double>();
  const auto n_over = r.get<std::uint32_t>();
  if (n_over > r.remaining() / sizeof(double)) throw DataError("checkpoint truncated");
  a.omega_overrides.resize(n_over);
  for (auto& o : a.omega_overrides) o = r.get<double>();
  a.seed = r.get<std::uint64_t>();
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint architecture invalid: ") + e.what());
  }

  const Network net = build_network(a);
  const auto d = r.get<std::uint64_t>();
  if (d != net.param_count) throw DataError("checkpoint parameter count does not match architecture");
  if (d > r.remaining() / sizeof(float)) throw DataError("checkpoint truncated");
  c.params.values.resize(static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < d; ++i)
    c.params.values[static_cast<Eigen::Index>(i)] = static_cast<double>(r.get<float>());
  c.params.layout = net.layout();

  c.mask = full_mask(a);
  const auto n = r.get<std::uint64_t>();
  if (n != c.mask.prunable_count()) throw DataError("checkpoint mask length does not match architecture");
  auto packed = r.bytes((n + 7) / 8);
  for (std::size_t k = 0; k < n; ++k) c.mask.set(k, (packed[k / 8] >> (k % 8)) & 1u);
  if (n % 8 != 0 && (packed.back() >> (n % 8)) != 0) throw DataError("checkpoint mask has stray bits");

  const auto body = r.pos();
  const auto footer = r.get<std::uint64_t>();
  if (footer != body) throw DataError("checkpoint footer length mismatch");
  if (r.remaining() != 0) throw DataError("trailing bytes after checkpoint footer");
  if (!c.params.values.allFinite()) throw DataError("checkpoint contains non-finite parameters");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace msinr
