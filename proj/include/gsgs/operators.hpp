#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace gsgs {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Half-plane DFT laid out like FFTW's r2c output.
using Spectrum = Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Images are flattened row-major: pixel (r, c) lives at r * cols + c.
struct GridShape {
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct PixelOffset {
  Index row = 0;
  Index col = 0;

  friend bool operator==(const PixelOffset&, const PixelOffset&) = default;
};

// Matrix-free real linear map with its adjoint. Implementations are immutable
// once built and may be applied concurrently.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Index in_dim() const = 0;
  virtual Index out_dim() const = 0;

  // Both entry points check the operand length and throw DimensionError.
  Vector apply(const Vector& x) const;
  Vector adjoint_apply(const Vector& y) const;

 protected:
  virtual Vector apply_impl(const Vector& x) const = 0;
  virtual Vector adjoint_impl(const Vector& y) const = 0;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Index dim);

  Index in_dim() const override { return dim_; }
  Index out_dim() const override { return dim_; }

 protected:
  Vector apply_impl(const Vector& x) const override { return x; }
  Vector adjoint_impl(const Vector& y) const override { return y; }

 private:
  Index dim_;
};

// Explicit row-major matrix. Used as the small-N oracle everywhere.
class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(DenseMatrix matrix);

  Index in_dim() const override { return matrix_.cols(); }
  Index out_dim() const override { return matrix_.rows(); }
  const DenseMatrix& matrix() const { return matrix_; }

 protected:
  Vector apply_impl(const Vector& x) const override;
  Vector adjoint_impl(const Vector& y) const override;

 private:
  DenseMatrix matrix_;
};

// Periodic 2-D convolution on a fixed grid, diagonalized by the real FFT.
// The spectrum holds the rows x (cols/2 + 1) half-plane of the kernel DFT.
class CirculantOperator final : public LinearOperator {
 public:
  CirculantOperator(GridShape shape, Spectrum half_spectrum);
  ~CirculantOperator() override;

  CirculantOperator(const CirculantOperator&) = delete;
  CirculantOperator& operator=(const CirculantOperator&) = delete;

  Index in_dim() const override { return shape_.size(); }
  Index out_dim() const override { return shape_.size(); }

  GridShape shape() const { return shape_; }
  const Spectrum& kernel_spectrum() const { return spectrum_; }

  // H^t H as a circulant: spectrum |h|^2.
  std::shared_ptr<const CirculantOperator> normal() const;

 protected:
  Vector apply_impl(const Vector& x) const override;
  Vector adjoint_impl(const Vector& y) const override;

 private:
  struct Plans;

  Vector filter(const Vector& x, bool conjugate) const;

  GridShape shape_;
  Spectrum spectrum_;
  std::unique_ptr<Plans> plans_;
};

// Binary selection: one low-resolution frame per offset, each frame taking the
// pixels (offset.row + i * factor, offset.col + j * factor). Frames are
// concatenated in offset order, each flattened row-major.
class DecimationOperator final : public LinearOperator {
 public:
  DecimationOperator(GridShape hr_shape, Index factor, std::vector<PixelOffset> offsets);

  Index in_dim() const override { return hr_shape_.size(); }
  Index out_dim() const override {
    return static_cast<Index>(offsets_.size()) * lr_shape().size();
  }

  GridShape hr_shape() const { return hr_shape_; }
  GridShape lr_shape() const { return {hr_shape_.rows / factor_, hr_shape_.cols / factor_}; }
  Index factor() const { return factor_; }
  const std::vector<PixelOffset>& offsets() const { return offsets_; }
  Index num_frames() const { return static_cast<Index>(offsets_.size()); }

 protected:
  Vector apply_impl(const Vector& x) const override;
  Vector adjoint_impl(const Vector& y) const override;

 private:
  GridShape hr_shape_;
  Index factor_;
  std::vector<PixelOffset> offsets_;
  std::vector<Index> source_;  // hr pixel index of every output entry
};

// ops[0] * ops[1] * ... * ops[n-1]; apply runs right to left.
class ComposedOperator final : public LinearOperator {
 public:
  explicit ComposedOperator(std::vector<OperatorPtr> ops);

  Index in_dim() const override { return ops_.back()->in_dim(); }
  Index out_dim() const override { return ops_.front()->out_dim(); }
  const std::vector<OperatorPtr>& factors() const { return ops_; }

 protected:
  Vector apply_impl(const Vector& x) const override;
  Vector adjoint_impl(const Vector& y) const override;

 private:
  std::vector<OperatorPtr> ops_;
};

// Stencil entry (i, j) multiplies x[r - (i - anchor.row), c - (j - anchor.col)]
// with periodic wrap, so a delta at the origin returns the stencil centred on
// the anchor.
std::shared_ptr<const CirculantOperator> make_circulant(GridShape shape,
                                                        const Eigen::MatrixXd& stencil,
                                                        PixelOffset anchor);

std::shared_ptr<const DecimationOperator> make_decimation(GridShape hr_shape, Index factor,
                                                          std::vector<PixelOffset> offsets);

OperatorPtr compose(std::vector<OperatorPtr> ops);

inline constexpr std::size_t kDefaultDensifyCap = 10'000'000;

DenseOperator densify(const LinearOperator& op, std::size_t max_entries = kDefaultDensifyCap);

}  // namespace gsgs
