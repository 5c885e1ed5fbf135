#include "gsgs/operators.hpp"

#include "gsgs/error.hpp"

#include <fftw3.h>

#include <mutex>
#include <string>

namespace gsgs {

namespace {

// The FFTW planner is not thread-safe; execution on fresh buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  T* data;
};

std::string dims(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

Vector LinearOperator::apply(const Vector& x) const {
  if (x.size() != in_dim()) {
    throw DimensionError("apply: expected length " + std::to_string(in_dim()) + ", got " +
                         std::to_string(x.size()));
  }
  return apply_impl(x);
}

Vector LinearOperator::adjoint_apply(const Vector& y) const {
  if (y.size() != out_dim()) {
    throw DimensionError("adjoint_apply: expected length " + std::to_string(out_dim()) +
                         ", got " + std::to_string(y.size()));
  }
  return adjoint_impl(y);
}

IdentityOperator::IdentityOperator(Index dim) : dim_(dim) {
  if (dim < 1) throw DimensionError("identity operator needs a positive dimension");
}

DenseOperator::DenseOperator(DenseMatrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() < 1 || matrix_.cols() < 1) throw DimensionError("empty dense operator");
}

Vector DenseOperator::apply_impl(const Vector& x) const { return matrix_ * x; }
Vector DenseOperator::adjoint_impl(const Vector& y) const { return matrix_.transpose() * y; }

// --- circulant -------------------------------------------------------------

struct CirculantOperator::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward != nullptr) fftw_destroy_plan(forward);
    if (backward != nullptr) fftw_destroy_plan(backward);
  }
};

CirculantOperator::CirculantOperator(GridShape shape, Spectrum half_spectrum)
    : shape_(shape), spectrum_(std::move(half_spectrum)), plans_(std::make_unique<Plans>()) {
  if (shape.rows < 1 || shape.cols < 1) throw DimensionError("circulant: empty grid");
  if (spectrum_.rows() != shape.rows || spectrum_.cols() != shape.cols / 2 + 1) {
    throw DimensionError("circulant: spectrum must be " + dims(shape.rows, shape.cols / 2 + 1));
  }
  const auto n_real = static_cast<std::size_t>(shape.size());
  const auto n_cplx = static_cast<std::size_t>(spectrum_.size());
  FftwBuffer<double> real(n_real);
  FftwBuffer<fftw_complex> cplx(n_cplx);
  const int r = static_cast<int>(shape.rows);
  const int c = static_cast<int>(shape.cols);
  std::lock_guard lock(planner_mutex());
  plans_->forward = fftw_plan_dft_r2c_2d(r, c, real.data, cplx.data, FFTW_ESTIMATE);
  plans_->backward = fftw_plan_dft_c2r_2d(r, c, cplx.data, real.data, FFTW_ESTIMATE);
  if (plans_->forward == nullptr || plans_->backward == nullptr) {
    throw Error("circulant: FFTW planning failed");
  }
}

CirculantOperator::~CirculantOperator() = default;

Vector CirculantOperator::filter(const Vector& x, bool conjugate) const {
  const auto n_real = static_cast<std::size_t>(shape_.size());
  const auto n_cplx = static_cast<std::size_t>(spectrum_.size());
  FftwBuffer<double> real(n_real);
  FftwBuffer<fftw_complex> cplx(n_cplx);
  std::copy(x.data(), x.data() + x.size(), real.data);
  fftw_execute_dft_r2c(plans_->forward, real.data, cplx.data);

  auto* z = reinterpret_cast<std::complex<double>*>(cplx.data);
  const std::complex<double>* h = spectrum_.data();
  const double scale = 1.0 / static_cast<double>(n_real);
  for (std::size_t k = 0; k < n_cplx; ++k) {
    z[k] *= (conjugate ? std::conj(h[k]) : h[k]) * scale;
  }
  fftw_execute_dft_c2r(plans_->backward, cplx.data, real.data);
  return Eigen::Map<const Vector>(real.data, x.size());
}

Vector CirculantOperator::apply_impl(const Vector& x) const { return filter(x, false); }
Vector CirculantOperator::adjoint_impl(const Vector& y) const { return filter(y, true); }

std::shared_ptr<const CirculantOperator> CirculantOperator::normal() const {
  Spectrum power = spectrum_.abs2().cast<std::complex<double>>();
  return std::make_shared<const CirculantOperator>(shape_, std::move(power));
}

std::shared_ptr<const CirculantOperator> make_circulant(GridShape shape,
                                                        const Eigen::MatrixXd& stencil,
                                                        PixelOffset anchor) {
  if (stencil.size() == 0) throw DimensionError("circulant: empty stencil");
  if (stencil.rows() > shape.rows || stencil.cols() > shape.cols) {
    throw DimensionError("circulant: stencil " + dims(stencil.rows(), stencil.cols()) +
                         " larger than grid " + dims(shape.rows, shape.cols));
  }
  if (anchor.row < 0 || anchor.row >= stencil.rows() || anchor.col < 0 ||
      anchor.col >= stencil.cols()) {
    throw ConfigError("circulant: anchor outside the stencil");
  }

  DenseMatrix padded = DenseMatrix::Zero(shape.rows, shape.cols);
  for (Index i = 0; i < stencil.rows(); ++i) {
    for (Index j = 0; j < stencil.cols(); ++j) {
      const Index r = ((i - anchor.row) % shape.rows + shape.rows) % shape.rows;
      const Index c = ((j - anchor.col) % shape.cols + shape.cols) % shape.cols;
      padded(r, c) += stencil(i, j);
    }
  }

  Spectrum spectrum(shape.rows, shape.cols / 2 + 1);
  {
    FftwBuffer<double> real(static_cast<std::size_t>(shape.size()));
    std::copy(padded.data(), padded.data() + padded.size(), real.data);
    std::lock_guard lock(planner_mutex());
    fftw_plan p = fftw_plan_dft_r2c_2d(static_cast<int>(shape.rows), static_cast<int>(shape.cols),
                                       real.data,
                                       reinterpret_cast<fftw_complex*>(spectrum.data()),
                                       FFTW_ESTIMATE);
    fftw_execute(p);
    fftw_destroy_plan(p);
  }
  return std::make_shared<const CirculantOperator>(shape, std::move(spectrum));
}

// --- decimation ------------------------------------------------------------

DecimationOperator::DecimationOperator(GridShape hr_shape, Index factor,
                                       std::vector<PixelOffset> offsets)
    : hr_shape_(hr_shape), factor_(factor), offsets_(std::move(offsets)) {
  if (factor < 1) throw ConfigError("decimation: factor must be >= 1");
  if (hr_shape.rows < 1 || hr_shape.cols < 1) throw ConfigError("decimation: empty grid");
  if (hr_shape.rows % factor != 0 || hr_shape.cols % factor != 0) {
    throw ConfigError("decimation: factor " + std::to_string(factor) + " does not divide " +
                      dims(hr_shape.rows, hr_shape.cols));
  }
  if (offsets_.empty()) throw ConfigError("decimation: at least one offset is required");
  for (const auto& o : offsets_) {
    if (o.row < 0 || o.row >= factor || o.col < 0 || o.col >= factor) {
      throw ConfigError("decimation: offset (" + std::to_string(o.row) + "," +
                        std::to_string(o.col) + ") outside [0, factor)^2");
    }
  }

  const GridShape lr = lr_shape();
  source_.reserve(static_cast<std::size_t>(out_dim()));
  for (const auto& o : offsets_) {
    for (Index i = 0; i < lr.rows; ++i) {
      for (Index j = 0; j < lr.cols; ++j) {
        source_.push_back((o.row + i * factor_) * hr_shape_.cols + (o.col + j * factor_));
      }
    }
  }
}

Vector DecimationOperator::apply_impl(const Vector& x) const {
  Vector y(out_dim());
  for (std::size_t k = 0; k < source_.size(); ++k) y[static_cast<Index>(k)] = x[source_[k]];
  return y;
}

Vector DecimationOperator::adjoint_impl(const Vector& y) const {
  Vector x = Vector::Zero(in_dim());
  for (std::size_t k = 0; k < source_.size(); ++k) x[source_[k]] += y[static_cast<Index>(k)];
  return x;
}

std::shared_ptr<const DecimationOperator> make_decimation(GridShape hr_shape, Index factor,
                                                          std::vector<PixelOffset> offsets) {
  return std::make_shared<const DecimationOperator>(hr_shape, factor, std::move(offsets));
}

// --- composition -----------------------------------------------------------

ComposedOperator::ComposedOperator(std::vector<OperatorPtr> ops) : ops_(std::move(ops)) {
  if (ops_.empty()) throw DimensionError("compose: empty operator list");
  for (const auto& op : ops_) {
    if (!op) throw DimensionError("compose: null operator");
  }
  for (std::size_t k = 0; k + 1 < ops_.size(); ++k) {
    if (ops_[k]->in_dim() != ops_[k + 1]->out_dim()) {
      throw DimensionError("compose: factor " + std::to_string(k) + " takes " +
                           std::to_string(ops_[k]->in_dim()) + " but factor " +
                           std::to_string(k + 1) + " yields " +
                           std::to_string(ops_[k + 1]->out_dim()));
    }
  }
}

Vector ComposedOperator::apply_impl(const Vector& x) const {
  Vector v = x;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) v = (*it)->apply(v);
  return v;
}

Vector ComposedOperator::adjoint_impl(const Vector& y) const {
  Vector v = y;
  for (const auto& op : ops_) v = op->adjoint_apply(v);
  return v;
}

OperatorPtr compose(std::vector<OperatorPtr> ops) {
  if (ops.size() == 1 && ops.front()) return ops.front();
  return std::make_shared<const ComposedOperator>(std::move(ops));
}

DenseOperator densify(const LinearOperator& op, std::size_t max_entries) {
  const auto entries = static_cast<std::size_t>(op.in_dim()) * static_cast<std::size_t>(op.out_dim());
  if (entries > max_entries) {
    throw SizeError("densify: " + std::to_string(entries) + " entries exceed cap " +
                    std::to_string(max_entries));
  }
  DenseMatrix m(op.out_dim(), op.in_dim());
  Vector e = Vector::Zero(op.in_dim());
  for (Index j = 0; j < op.in_dim(); ++j) {
    e[j] = 1.0;
    m.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return DenseOperator(std::move(m));
}

}  // namespace gsgs
