#include "capcritic/diffcore.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "capcritic/error.hpp"
#include "capcritic/fft.hpp"

namespace capcritic {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const Tensor& t) { return ConstMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }
MutMap view(Tensor& t) { return MutMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols) shape_fail(op, a, b);
}

}  // namespace

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " + shape_string());
  }
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

void Parameter::zero_grad() {
  if (grad.rows != value.rows || grad.cols != value.cols) {
    grad = Tensor(value.rows, value.cols);
  } else {
    std::fill(grad.data.begin(), grad.data.end(), 0.0);
  }
}

// ---------------------------------------------------------------------------

Var Tape::push(Tensor value, std::function<void(Tape&, std::size_t)> backward) {
  nodes_.push_back(Node{std::move(value), nullptr, Tensor(), nullptr, std::move(backward)});
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::param(Parameter& parameter) {
  Var v = push(Tensor(), nullptr);
  nodes_[v.id].external = &parameter.value;
  nodes_[v.id].parameter = &parameter;
  return v;
}

void Tape::backward(Var loss) {
  const Tensor& lv = value(loss);
  if (lv.rows != 1 || lv.cols != 1) throw ShapeError("backward: loss must be 1x1, got " + lv.shape_string());
  for (std::size_t i = 0; i <= loss.id; ++i) {
    auto& n = nodes_[i];
    const Tensor& v = n.external ? *n.external : n.value;
    if (n.grad.rows != v.rows || n.grad.cols != v.cols) {
      n.grad = Tensor(v.rows, v.cols);
    } else {
      std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    }
  }
  nodes_[loss.id].grad.data[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
    if (n.parameter) {
      auto& pg = n.parameter->grad;
      if (pg.rows != n.grad.rows || pg.cols != n.grad.cols) pg = Tensor(n.grad.rows, n.grad.cols);
      for (std::size_t k = 0; k < pg.data.size(); ++k) pg.data[k] += n.grad.data[k];
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols != bv.rows) shape_fail("matmul", av, bv);
  Tensor out(av.rows, bv.cols);
  view(out).noalias() = view(av) * view(bv);
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const auto g = view(t.out_grad(self));
    view(t.grad_mut(a)).noalias() += g * view(t.value(b)).transpose();
    view(t.grad_mut(b)).noalias() += view(t.value(a)).transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same("add", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const auto& g = t.out_grad(self).data;
    auto& ga = t.grad_mut(a).data;
    auto& gb = t.grad_mut(b).data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Var Tape::add_row(Var a, Var bias) {
  const Tensor& av = value(a);
  const Tensor& bv = value(bias);
  if (bv.rows != 1 || bv.cols != av.cols) shape_fail("add_row", av, bv);
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) += bv.data[c];
  }
  return push(std::move(out), [a, bias](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    auto& ga = t.grad_mut(a).data;
    auto& gb = t.grad_mut(bias).data;
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) {
        ga[r * g.cols + c] += g.at(r, c);
        gb[c] += g.at(r, c);
      }
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same("mul", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const auto& g = t.out_grad(self).data;
    const auto& x = t.value(a).data;
    const auto& y = t.value(b).data;
    auto& ga = t.grad_mut(a).data;
    auto& gb = t.grad_mut(b).data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * y[i];
      gb[i] += g[i] * x[i];
    }
  });
}

Var Tape::scale(Var a, double factor) {
  Tensor out = value(a);
  for (auto& x : out.data) x *= factor;
  return push(std::move(out), [a, factor](Tape& t, std::size_t self) {
    const auto& g = t.out_grad(self).data;
    auto& ga = t.grad_mut(a).data;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  if (record_branches_) {
    for (double x : out.data) branches_.push_back(x > 0.0);
  }
  for (auto& x : out.data) x = x > 0.0 ? x : 0.0;
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const auto& g = t.out_grad(self).data;
    const auto& x = t.value(a).data;
    auto& ga = t.grad_mut(a).data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const auto& g = t.out_grad(self).data;
    const auto& y = t.value(Var{self}).data;
    auto& ga = t.grad_mut(a).data;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::tanh(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = std::tanh(x);
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const auto& g = t.out_grad(self).data;
    const auto& y = t.value(Var{self}).data;
    auto& ga = t.grad_mut(a).data;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rows = value(parts[0]).rows;
  std::size_t cols = 0;
  for (Var p : parts) {
    if (value(p).rows != rows) shape_fail("concat", value(parts[0]), value(p));
    cols += value(p).cols;
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.row_span(r).begin(), pv.row_span(r).end(), out.row_span(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += pv.cols;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    std::size_t off = 0;
    for (Var p : inputs) {
      Tensor& gp = t.grad_mut(p);
      for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < gp.cols; ++c) gp.at(r, c) += g.at(r, off + c);
      }
      off += gp.cols;
    }
  });
}

Var Tape::slice(Var a, std::size_t col_begin, std::size_t col_end) {
  const Tensor& av = value(a);
  if (col_begin > col_end || col_end > av.cols) {
    throw ShapeError("slice: columns [" + std::to_string(col_begin) + ", " + std::to_string(col_end) +
                     ") out of range for " + av.shape_string());
  }
  Tensor out(av.rows, col_end - col_begin);
  for (std::size_t r = 0; r < av.rows; ++r) {
    for (std::size_t c = col_begin; c < col_end; ++c) out.at(r, c - col_begin) = av.at(r, c);
  }
  return push(std::move(out), [a, col_begin](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) ga.at(r, col_begin + c) += g.at(r, c);
    }
  });
}

Var Tape::slice_rows(Var a, std::size_t row_begin, std::size_t row_end) {
  const Tensor& av = value(a);
  if (row_begin > row_end || row_end > av.rows) {
    throw ShapeError("slice_rows: rows [" + std::to_string(row_begin) + ", " + std::to_string(row_end) +
                     ") out of range for " + av.shape_string());
  }
  Tensor out(row_end - row_begin, av.cols,
             std::vector<double>(av.data.begin() + static_cast<std::ptrdiff_t>(row_begin * av.cols),
                                 av.data.begin() + static_cast<std::ptrdiff_t>(row_end * av.cols)));
  return push(std::move(out), [a, row_begin](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    auto& ga = t.grad_mut(a).data;
    const std::size_t offset = row_begin * g.cols;
    for (std::size_t i = 0; i < g.data.size(); ++i) ga[offset + i] += g.data[i];
  });
}

Var Tape::lookup(Var table, std::span<const int> ids, int frozen_id) {
  const Tensor& tv = value(table);
  Tensor out(ids.size(), tv.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const int id = ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= tv.rows) {
      throw ShapeError("lookup: id " + std::to_string(id) + " out of range for table " + tv.shape_string());
    }
    auto src = tv.row_span(static_cast<std::size_t>(id));
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  std::vector<int> index(ids.begin(), ids.end());
  return push(std::move(out), [table, index = std::move(index), frozen_id](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    Tensor& gt = t.grad_mut(table);
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (index[r] == frozen_id) continue;
      auto dst = gt.row_span(static_cast<std::size_t>(index[r]));
      auto src = g.row_span(r);
      for (std::size_t c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  });
}

Var Tape::select_rows(std::span<const std::uint8_t> keep, Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same("select_rows", av, bv);
  if (keep.size() != av.rows) {
    throw ShapeError("select_rows: mask length " + std::to_string(keep.size()) + " for " + av.shape_string());
  }
  Tensor out(av.rows, av.cols);
  for (std::size_t r = 0; r < av.rows; ++r) {
    auto src = keep[r] ? av.row_span(r) : bv.row_span(r);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  std::vector<std::uint8_t> mask(keep.begin(), keep.end());
  return push(std::move(out), [a, b, mask = std::move(mask)](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t r = 0; r < g.rows; ++r) {
      auto dst = mask[r] ? ga.row_span(r) : gb.row_span(r);
      auto src = g.row_span(r);
      for (std::size_t c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  });
}

Var Tape::scatter_signed(Var x, std::span<const std::uint32_t> index, std::span<const double> sign,
                         std::size_t out_cols) {
  const Tensor& xv = value(x);
  if (index.size() != xv.cols || sign.size() != xv.cols) {
    throw ShapeError("scatter_signed: plan of length " + std::to_string(index.size()) + " for input " +
                     xv.shape_string());
  }
  Tensor out(xv.rows, out_cols);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t j = 0; j < xv.cols; ++j) {
      if (index[j] >= out_cols) throw ShapeError("scatter_signed: bucket out of range");
      out.at(r, index[j]) += sign[j] * xv.at(r, j);
    }
  }
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  std::vector<double> sg(sign.begin(), sign.end());
  return push(std::move(out), [x, idx = std::move(idx), sg = std::move(sg)](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    Tensor& gx = t.grad_mut(x);
    for (std::size_t r = 0; r < gx.rows; ++r) {
      for (std::size_t j = 0; j < gx.cols; ++j) gx.at(r, j) += sg[j] * g.at(r, idx[j]);
    }
  });
}

Var Tape::circular_convolve(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same("circular_convolve", av, bv);
  Tensor out(av.rows, av.cols);
  for (std::size_t r = 0; r < av.rows; ++r) {
    const auto row = capcritic::circular_convolve(av.row_span(r), bv.row_span(r));
    std::copy(row.begin(), row.end(), out.row_span(r).begin());
  }
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t r = 0; r < g.rows; ++r) {
      const auto da = circular_correlate(g.row_span(r), bv.row_span(r));
      const auto db = circular_correlate(g.row_span(r), av.row_span(r));
      auto ra = ga.row_span(r);
      auto rb = gb.row_span(r);
      for (std::size_t c = 0; c < g.cols; ++c) {
        ra[c] += da[c];
        rb[c] += db[c];
      }
    }
  });
}

Var Tape::signed_sqrt(Var a, double eps) {
  const double root_eps = std::sqrt(eps);
  Tensor out = value(a);
  for (auto& x : out.data) {
    const double mag = std::sqrt(std::abs(x) + eps) - root_eps;
    x = x < 0.0 ? -mag : mag;
  }
  return push(std::move(out), [a, eps](Tape& t, std::size_t self) {
    const auto& g = t.out_grad(self).data;
    const auto& x = t.value(a).data;
    auto& ga = t.grad_mut(a).data;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / std::sqrt(std::abs(x[i]) + eps);
  });
}

Var Tape::l2_normalize_rows(Var a, double eps) {
  const Tensor& av = value(a);
  Tensor out(av.rows, av.cols);
  std::vector<double> norms(av.rows);
  for (std::size_t r = 0; r < av.rows; ++r) {
    double sq = 0.0;
    for (double x : av.row_span(r)) sq += x * x;
    norms[r] = std::max(std::sqrt(sq), eps);
    for (std::size_t c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c) / norms[r];
  }
  return push(std::move(out), [a, eps, norms = std::move(norms)](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& y = t.value(Var{self});
    Tensor& ga = t.grad_mut(a);
    for (std::size_t r = 0; r < g.rows; ++r) {
      const bool clamped = norms[r] <= eps;
      double dot = 0.0;
      if (!clamped) {
        for (std::size_t c = 0; c < g.cols; ++c) dot += y.at(r, c) * g.at(r, c);
      }
      for (std::size_t c = 0; c < g.cols; ++c) {
        ga.at(r, c) += (g.at(r, c) - y.at(r, c) * dot) / norms[r];
      }
    }
  });
}

Var Tape::sum(Var a) {
  double total = 0.0;
  for (double x : value(a).data) total += x;
  return push(Tensor(1, 1, total), [a](Tape& t, std::size_t self) {
    const double g = t.out_grad(self).data[0];
    for (auto& x : t.grad_mut(a).data) x += g;
  });
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      p.at(r, c) = std::exp(row[c] - mx);
      z += p.at(r, c);
    }
    for (std::size_t c = 0; c < logits.cols; ++c) p.at(r, c) /= z;
  }
  return p;
}

Var Tape::softmax_cross_entropy(Var logits, const Tensor& labels) {
  const Tensor& lv = value(logits);
  require_same("softmax_cross_entropy", lv, labels);
  if (lv.rows == 0) throw ShapeError("softmax_cross_entropy: empty batch");
  for (std::size_t r = 0; r < labels.rows; ++r) {
    int ones = 0;
    for (double q : labels.row_span(r)) {
      if (q == 1.0) {
        ++ones;
      } else if (q != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw ConfigError("softmax_cross_entropy: label row " + std::to_string(r) + " is not one-hot");
  }
  Tensor p = softmax_rows(lv);
  double loss = 0.0;
  for (std::size_t r = 0; r < lv.rows; ++r) {
    const auto row = lv.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double x : row) z += std::exp(x - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t c = 0; c < lv.cols; ++c) {
      if (labels.at(r, c) != 0.0) loss -= labels.at(r, c) * (row[c] - log_z);
    }
  }
  const double batch = static_cast<double>(lv.rows);
  loss /= batch;
  return push(Tensor(1, 1, loss), [logits, p = std::move(p), labels, batch](Tape& t, std::size_t self) {
    const double g = t.out_grad(self).data[0];
    auto& gl = t.grad_mut(logits).data;
    for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += g * (p.data[i] - labels.data[i]) / batch;
  });
}

// ---------------------------------------------------------------------------

GradCheckReport check_gradients(std::span<Parameter* const> parameters,
                                const std::function<Var(Tape&)>& build_loss, double epsilon,
                                double tol_rel) {
  if (!(epsilon > 0.0)) throw ConfigError("check_gradients: epsilon must be positive");
  for (Parameter* p : parameters) p->zero_grad();
  {
    Tape tape;
    Var loss = build_loss(tape);
    tape.backward(loss);
  }
  auto evaluate = [&](std::vector<bool>& branches) {
    Tape tape;
    tape.record_branches(true);
    Var loss = build_loss(tape);
    branches = tape.branches();
    return tape.value(loss).data.at(0);
  };
  std::vector<bool> up_branches, down_branches;
  GradCheckReport report;
  for (Parameter* p : parameters) {
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      double& x = p->value.data[i];
      const double saved = x;
      const double h = epsilon * std::max(1.0, std::abs(saved));
      x = saved + h;
      const double up = evaluate(up_branches);
      x = saved - h;
      const double down = evaluate(down_branches);
      x = saved;
      if (up_branches != down_branches) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data[i];
      const double err =
          std::abs(numeric - analytic) / std::max({1.0, std::abs(numeric), std::abs(analytic)});
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_parameter = p->name;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error < tol_rel;
  return report;
}

}  // namespace capcritic
