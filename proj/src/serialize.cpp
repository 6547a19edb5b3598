#include "shps/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "shps/error.hpp"

namespace shps {

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'H', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename Scalar>
constexpr std::uint32_t scalar_kind() {
  return is_complex_v<Scalar> ? 2u : 1u;
}

std::uint64_t fnv(const void* data, std::size_t n, std::uint64_t h) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < n; ++k) {
    h ^= b[k];
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw CacheError("cannot open cache file '" + path.string() + "' for writing");
  }
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <typename T>
  void array(const T* data, std::size_t n) {
    pod<std::uint64_t>(n);
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
  }
  template <typename Derived>
  void matrix(const Eigen::PlainObjectBase<Derived>& m) {
    pod<std::int64_t>(m.rows());
    pod<std::int64_t>(m.cols());
    out_.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(typename Derived::Scalar)));
  }
  template <typename T>
  void vec(const std::vector<T>& v) {
    array(v.data(), v.size());
  }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw CacheError("failed writing cache file '" + path.string() + "'");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw CacheError("cannot open cache file '" + path.string() + "'");
  }
  template <typename T>
  T pod() {
    T v{};
    read(&v, sizeof(T));
    return v;
  }
  template <typename T>
  std::vector<T> vec() {
    const auto n = pod<std::uint64_t>();
    check_size(n * sizeof(T));
    std::vector<T> v(n);
    read(v.data(), n * sizeof(T));
    return v;
  }
  template <typename M>
  M matrix() {
    const auto r = pod<std::int64_t>();
    const auto c = pod<std::int64_t>();
    if (r < 0 || c < 0) fail("negative matrix dimension");
    check_size(static_cast<std::uint64_t>(r * c) * sizeof(typename M::Scalar));
    M m(r, c);
    read(m.data(), static_cast<std::size_t>(m.size()) * sizeof(typename M::Scalar));
    return m;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw CacheError("cache file '" + path_.string() + "': " + what);
  }

 private:
  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated");
  }
  // Guards allocations against corrupt length fields.
  void check_size(std::uint64_t bytes) {
    if (bytes > (std::uint64_t{1} << 40)) fail("implausible block size");
  }

  std::ifstream in_;
  std::filesystem::path path_;
};

template <typename Scalar>
void write_lu(Writer& w, const LuFactor<Scalar>& lu) {
  w.matrix(lu.lu());
  w.vec(lu.perm());
  w.pod(lu.rcond());
  w.pod(lu.min_pivot_ratio());
}

template <typename Scalar>
LuFactor<Scalar> read_lu(Reader& r) {
  auto lu = r.template matrix<Mat<Scalar>>();
  auto perm = r.template vec<int>();
  const double rcond = r.template pod<double>();
  const double ratio = r.template pod<double>();
  if (lu.rows() != lu.cols() || static_cast<Index>(perm.size()) != lu.rows()) r.fail("inconsistent LU block");
  return LuFactor<Scalar>::from_parts(std::move(lu), std::move(perm), rcond, ratio);
}

}  // namespace

std::uint64_t text_fingerprint(std::string_view text, std::uint64_t seed) {
  return fnv(text.data(), text.size(), seed);
}

std::uint64_t mesh_fingerprint(const SurfaceMesh& mesh) {
  std::uint64_t h = 14695981039346656037ull;
  const std::int64_t head[2] = {mesh.order, static_cast<std::int64_t>(mesh.elements.size())};
  h = fnv(head, sizeof(head), h);
  for (const auto& el : mesh.elements) h = fnv(el.nodes.data(), static_cast<std::size_t>(el.nodes.size()) * 8, h);
  for (const auto& it : mesh.interfaces) {
    const std::int32_t v[6] = {it.a.element, static_cast<std::int32_t>(it.a.side), static_cast<std::int32_t>(it.a.orientation),
                               it.b.element, static_cast<std::int32_t>(it.b.side), static_cast<std::int32_t>(it.b.orientation)};
    h = fnv(v, sizeof(v), h);
  }
  return h;
}

template <typename Scalar>
void save_factorization(const Factorization<Scalar>& fact, const std::filesystem::path& path,
                        std::uint64_t fingerprint) {
  Writer w(path);
  for (char c : kMagic) w.pod(c);
  w.pod(kVersion);
  w.pod(scalar_kind<Scalar>());
  w.pod(fingerprint);
  w.pod<std::uint8_t>(fact.closed);
  w.pod<std::uint8_t>(fact.rank_one_fix);
  w.pod<std::uint8_t>(fact.implicit_shift.has_value());
  w.pod(fact.implicit_shift.value_or(0.0));
  w.vec(fact.root_boundary_ids);

  w.pod<std::int32_t>(fact.tree.num_leaves);
  w.pod<std::uint64_t>(fact.tree.merges.size());
  for (const auto& m : fact.tree.merges) {
    w.pod<std::int32_t>(m.alpha);
    w.pod<std::int32_t>(m.beta);
    w.pod<std::int32_t>(m.level);
  }

  w.pod<std::uint64_t>(fact.leaves.size());
  for (const auto& l : fact.leaves) {
    w.pod<std::int32_t>(l.element);
    w.matrix(l.S);
    w.matrix(l.Sigma);
    write_lu(w, l.interior);
    w.matrix(l.flux_interior);
    w.matrix(l.v);
    w.matrix(l.v_flux);
  }
  w.pod<std::uint64_t>(fact.merges.size());
  for (const auto& m : fact.merges) {
    const std::int32_t head[4] = {m.alpha, m.beta, m.cluster, m.level};
    for (auto v : head) w.pod(v);
    w.vec(m.shared_ids);
    w.vec(m.boundary_ids);
    w.vec(m.alpha_shared);
    w.vec(m.alpha_rest);
    w.vec(m.beta_shared);
    w.vec(m.beta_rest);
    write_lu(w, m.interface);
    w.matrix(m.S_I);
    w.matrix(m.coupling);
    w.matrix(m.Sigma);
    w.matrix(m.v_I);
    w.matrix(m.v_flux);
    w.pod<std::uint8_t>(m.fix_q.has_value());
    if (m.fix_q) w.matrix(*m.fix_q);
  }
  w.finish(path);
}

template <typename Scalar>
Factorization<Scalar> load_factorization(const std::filesystem::path& path, std::shared_ptr<const SurfaceMesh> mesh,
                                         std::uint64_t fingerprint) {
  Reader r(path);
  char magic[4];
  for (char& c : magic) c = r.pod<char>();
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("not a factorization cache");
  if (const auto v = r.pod<std::uint32_t>(); v != kVersion)
    r.fail("format version " + std::to_string(v) + ", expected " + std::to_string(kVersion));
  if (r.pod<std::uint32_t>() != scalar_kind<Scalar>()) r.fail("scalar type differs");
  if (r.pod<std::uint64_t>() != fingerprint) r.fail("fingerprint differs from the current mesh and operator");

  Factorization<Scalar> f;
  f.mesh = std::move(mesh);
  f.closed = r.pod<std::uint8_t>() != 0;
  f.rank_one_fix = r.pod<std::uint8_t>() != 0;
  const bool has_shift = r.pod<std::uint8_t>() != 0;
  const double shift = r.pod<double>();
  if (has_shift) f.implicit_shift = shift;
  f.root_boundary_ids = r.vec<Index>();

  f.tree.num_leaves = r.pod<std::int32_t>();
  if (f.tree.num_leaves != f.mesh->size()) r.fail("element count differs from the mesh");
  const auto nm = r.pod<std::uint64_t>();
  if (nm + 1 != static_cast<std::uint64_t>(f.tree.num_leaves) && !(nm == 0 && f.tree.num_leaves == 1))
    r.fail("merge count does not match element count");
  for (std::uint64_t m = 0; m < nm; ++m) {
    MergePair pair;
    pair.alpha = r.pod<std::int32_t>();
    pair.beta = r.pod<std::int32_t>();
    pair.level = r.pod<std::int32_t>();
    if (pair.level < 0 || pair.level > static_cast<int>(nm)) r.fail("bad merge level");
    if (static_cast<int>(f.tree.levels.size()) <= pair.level) f.tree.levels.resize(static_cast<std::size_t>(pair.level) + 1);
    f.tree.levels[static_cast<std::size_t>(pair.level)].push_back(static_cast<int>(m));
    f.tree.merges.push_back(pair);
  }

  if (r.pod<std::uint64_t>() != static_cast<std::uint64_t>(f.tree.num_leaves)) r.fail("leaf count mismatch");
  f.leaves.resize(static_cast<std::size_t>(f.tree.num_leaves));
  for (auto& l : f.leaves) {
    l.element = r.pod<std::int32_t>();
    l.S = r.matrix<Mat<Scalar>>();
    l.Sigma = r.matrix<Mat<Scalar>>();
    l.interior = read_lu<Scalar>(r);
    l.flux_interior = r.matrix<Eigen::MatrixXd>();
    l.v = r.matrix<Vec<Scalar>>();
    l.v_flux = r.matrix<Vec<Scalar>>();
  }
  if (r.pod<std::uint64_t>() != nm) r.fail("merge node count mismatch");
  f.merges.resize(nm);
  for (auto& m : f.merges) {
    m.alpha = r.pod<std::int32_t>();
    m.beta = r.pod<std::int32_t>();
    m.cluster = r.pod<std::int32_t>();
    m.level = r.pod<std::int32_t>();
    m.shared_ids = r.vec<Index>();
    m.boundary_ids = r.vec<Index>();
    m.alpha_shared = r.vec<Index>();
    m.alpha_rest = r.vec<Index>();
    m.beta_shared = r.vec<Index>();
    m.beta_rest = r.vec<Index>();
    m.interface = read_lu<Scalar>(r);
    m.S_I = r.matrix<Mat<Scalar>>();
    m.coupling = r.matrix<Mat<Scalar>>();
    m.Sigma = r.matrix<Mat<Scalar>>();
    m.v_I = r.matrix<Vec<Scalar>>();
    m.v_flux = r.matrix<Vec<Scalar>>();
    if (r.pod<std::uint8_t>() != 0) m.fix_q = r.matrix<Eigen::VectorXd>();
  }
  return f;
}

template void save_factorization(const Factorization<double>&, const std::filesystem::path&, std::uint64_t);
template void save_factorization(const Factorization<Complex>&, const std::filesystem::path&, std::uint64_t);
template Factorization<double> load_factorization(const std::filesystem::path&, std::shared_ptr<const SurfaceMesh>,
                                                  std::uint64_t);
template Factorization<Complex> load_factorization(const std::filesystem::path&, std::shared_ptr<const SurfaceMesh>,
                                                   std::uint64_t);

}  // namespace shps
