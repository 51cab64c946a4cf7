#pragma once

// Dense row-major tensors with a reverse-mode tape. Only the operations the
// critic needs are provided. Vectors are 1 x n tensors; batched data is
// laid out as one example per row.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace capcritic {

struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values);

  static Tensor row(std::span<const double> values);

  std::size_t size() const { return data.size(); }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row_span(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row_span(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::string shape_string() const;

  bool operator==(const Tensor&) const = default;
};

// A trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v);
  void zero_grad();
};

struct Var {
  std::size_t id = SIZE_MAX;
};

// Records operations as they execute and replays their adjoints in reverse.
// One tape serves one forward/backward pass and is not thread-safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter; backward() adds into parameter.grad.
  Var param(Parameter& parameter);

  const Tensor& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external ? *n.external : n.value;
  }
  // Valid after backward().
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // When on, relu records which side of zero each input fell on, so a
  // gradient check can tell when a perturbation crossed a kink.
  void record_branches(bool on) { record_branches_ = on; }
  const std::vector<bool>& branches() const { return branches_; }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node and
  // bound parameter. loss must be 1 x 1.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // a: [n, m], bias: [1, m] broadcast over rows
  Var add_row(Var a, Var bias);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  // Column-wise concatenation; all inputs share the row count.
  Var concat(std::span<const Var> parts);
  Var slice(Var a, std::size_t col_begin, std::size_t col_end);
  Var slice_rows(Var a, std::size_t row_begin, std::size_t row_end);
  // Row r of the result is row ids[r] of table. Rows equal to frozen_id
  // receive no gradient (pass -1 to disable).
  Var lookup(Var table, std::span<const int> ids, int frozen_id);
  // Row-wise select: row r is a's row when keep[r] != 0, otherwise b's.
  Var select_rows(std::span<const std::uint8_t> keep, Var a, Var b);
  // out[r, index[j]] += sign[j] * x[r, j]
  Var scatter_signed(Var x, std::span<const std::uint32_t> index, std::span<const double> sign,
                     std::size_t out_cols);
  // Row-wise circular convolution; cols must be a power of two.
  Var circular_convolve(Var a, Var b);
  // sign(x) * (sqrt(|x| + eps) - sqrt(eps)); smooth at zero.
  Var signed_sqrt(Var a, double eps);
  // Each row divided by max(||row||, eps).
  Var l2_normalize_rows(Var a, double eps);
  Var sum(Var a);
  // Mean over rows of -sum_c labels[r,c] * log softmax(logits)[r,c].
  // labels must hold one-hot rows (ConfigError otherwise).
  Var softmax_cross_entropy(Var logits, const Tensor& labels);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;  // parameter leaves read the parameter in place
    Tensor grad;
    Parameter* parameter = nullptr;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Var push(Tensor value, std::function<void(Tape&, std::size_t)> backward);
  Tensor& grad_mut(Var v) { return nodes_[v.id].grad; }
  const Tensor& out_grad(std::size_t self) const { return nodes_[self].grad; }

  std::vector<Node> nodes_;
  bool record_branches_ = false;
  std::vector<bool> branches_;
};

// Row-wise softmax, computed with the max-subtraction trick.
Tensor softmax_rows(const Tensor& logits);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  // elements whose +h and -h evaluations took different relu branches;
  // central differences are meaningless there, so they are not scored
  std::size_t skipped_kinks = 0;
  bool passed = true;
};

// Compares tape gradients with central differences for every element of the
// given parameters. build_loss must construct the full forward pass on the
// tape it receives and return a 1 x 1 loss. The step for element x is
// epsilon * max(1, |x|); the error is |a - b| / max(1, |a|, |b|).
GradCheckReport check_gradients(std::span<Parameter* const> parameters,
                                const std::function<Var(Tape&)>& build_loss, double epsilon,
                                double tol_rel);

}  // namespace capcritic
