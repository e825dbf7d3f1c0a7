#include "oselmq/oselm.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "oselmq/errors.hpp"

namespace oselmq {

namespace {

constexpr char kMagic[4] = {'O', 'S', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("checkpoint: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("checkpoint: truncated payload");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

void write_matrix(std::ostream& os, const Matrix& m) {
  for (double v : m.data()) write_f64(os, v);
}

Matrix read_matrix(std::istream& is, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = read_f64(is);
  return m;
}

}  // namespace

OselmState::OselmState(ElmParams params) : params_(std::move(params)) {
  params_.shape.validate();
  p_ = Matrix(params_.shape.n_tilde, params_.shape.n_tilde);
}

void OselmState::init_train(const Matrix& x0, const Matrix& t0, double delta) {
  if (trained_) throw StateError("init_train: already trained");
  if (delta < 0.0) throw ConfigError("init_train: delta must be >= 0");
  if (t0.rows() != x0.rows() || t0.cols() != params_.shape.m) {
    throw ShapeError("init_train: targets " + shape_string(t0) + " for input " +
                     shape_string(x0));
  }
  const Matrix h = hidden(params_, x0);
  const Matrix ht = transpose(h);
  Matrix gram = matmul(ht, h);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += delta;
  p_ = inverse(gram);
  params_.beta = matmul(p_, matmul(ht, t0));
  trained_ = true;
}

void OselmState::seq_train(const Matrix& x, const Matrix& t) {
  if (!trained_) throw StateError("seq_train: initial training has not run");
  const std::size_t nt = params_.shape.n_tilde;
  const std::size_t m = params_.shape.m;
  if (x.rows() != 1 || t.rows() != 1 || t.cols() != m) {
    throw ShapeError("seq_train: expected 1-row sample, got x " + shape_string(x) +
                     ", t " + shape_string(t));
  }
  const Matrix hrow = hidden(params_, x);
  const double* h = hrow.row(0).data();

  // z = P h^T, s = 1 + h z.
  std::vector<double> z(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    const double* pi = p_.row(i).data();
    double acc = 0.0;
    for (std::size_t j = 0; j < nt; ++j) acc += pi[j] * h[j];
    z[i] = acc;
  }
  double s = 1.0;
  for (std::size_t i = 0; i < nt; ++i) s += h[i] * z[i];
  if (std::abs(s) < 1e-12) {
    throw NumericError("seq_train: degenerate innovation denominator s=" + std::to_string(s));
  }
  const double inv_s = 1.0 / s;

  // P <- P - z z^T / s, then beta <- beta + (P_new h^T) (t - h beta) where
  // P_new h^T reduces algebraically to z / s.
  for (std::size_t i = 0; i < nt; ++i) {
    const double zi = z[i] * inv_s;
    double* pi = p_.row(i).data();
    for (std::size_t j = 0; j < nt; ++j) pi[j] -= zi * z[j];
  }
  for (std::size_t c = 0; c < m; ++c) {
    double pred = 0.0;
    for (std::size_t i = 0; i < nt; ++i) pred += h[i] * params_.beta(i, c);
    const double resid = t(0, c) - pred;
    if (resid == 0.0) continue;
    for (std::size_t i = 0; i < nt; ++i) params_.beta(i, c) += z[i] * inv_s * resid;
  }
  // Re-symmetrize P; floating-point drift would otherwise accumulate over
  // many updates.
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = i + 1; j < nt; ++j) {
      const double avg = 0.5 * (p_(i, j) + p_(j, i));
      p_(i, j) = avg;
      p_(j, i) = avg;
    }
  }
}

Matrix OselmState::predict(const Matrix& x) const { return elm_predict(params_, x); }

void OselmState::sync_learned_from(const OselmState& src) {
  if (src.params_.shape.n != params_.shape.n ||
      src.params_.shape.n_tilde != params_.shape.n_tilde ||
      src.params_.shape.m != params_.shape.m) {
    throw ShapeError("sync_learned_from: layer sizes differ");
  }
  params_.beta = src.params_.beta;
  p_ = src.p_;
  trained_ = src.trained_;
}

void OselmState::save(std::ostream& os) const {
  if (!trained_) throw StateError("save: only trained states can be checkpointed");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(params_.shape.n));
  write_u32(os, static_cast<std::uint32_t>(params_.shape.n_tilde));
  write_u32(os, static_cast<std::uint32_t>(params_.shape.m));
  write_matrix(os, params_.alpha);
  write_matrix(os, params_.bias);
  write_matrix(os, params_.beta);
  write_matrix(os, p_);
  if (!os) throw IoError("checkpoint: write failed");
}

void OselmState::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  save(os);
}

OselmState OselmState::load(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw IoError("checkpoint: bad magic");
  }
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  NetworkShape shape;
  shape.n = read_u32(is);
  shape.n_tilde = read_u32(is);
  shape.m = read_u32(is);
  shape.validate();
  ElmParams params;
  params.shape = shape;
  params.alpha = read_matrix(is, shape.n, shape.n_tilde);
  params.bias = read_matrix(is, 1, shape.n_tilde);
  params.beta = read_matrix(is, shape.n_tilde, shape.m);
  OselmState state(std::move(params));
  state.p_ = read_matrix(is, shape.n_tilde, shape.n_tilde);
  state.trained_ = true;
  return state;
}

OselmState OselmState::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path.string());
  return load(is);
}

}  // namespace oselmq
