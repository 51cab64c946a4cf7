#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>

#include "capcritic/diffcore.hpp"
#include "capcritic/error.hpp"
#include "capcritic/fft.hpp"
#include "capcritic/rng.hpp"

using namespace capcritic;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (auto& x : t.data) x = scale * rng.uniform(-1.0, 1.0);
  return t;
}

// Random linear readout makes every output element matter.
Var readout(Tape& tape, Var out, std::uint64_t seed) {
  const Tensor& v = tape.value(out);
  Rng rng(seed);
  Var w = tape.constant(random_tensor(v.rows, v.cols, rng));
  return tape.sum(tape.mul(out, w));
}

void check_op(const std::string& name, std::vector<Parameter>& params,
              const std::function<Var(Tape&, std::vector<Var>&)>& op) {
  std::vector<Parameter*> ptrs;
  for (auto& p : params) ptrs.push_back(&p);
  auto report = check_gradients(
      ptrs,
      [&](Tape& tape) {
        std::vector<Var> vs;
        for (auto& p : params) vs.push_back(tape.param(p));
        return readout(tape, op(tape, vs), 99);
      },
      1e-5, 1e-4);
  INFO(name << " worst " << report.worst_parameter << "[" << report.worst_index << "] rel "
            << report.max_rel_error);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-4);
  CHECK(report.checked > 0);
}

std::vector<Parameter> make_params(std::initializer_list<std::pair<std::size_t, std::size_t>> shapes,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Parameter> out;
  int i = 0;
  for (auto [r, c] : shapes) out.emplace_back("p" + std::to_string(i++), random_tensor(r, c, rng));
  return out;
}

}  // namespace

TEST_CASE("relu forward") {
  Tape tape;
  Var x = tape.constant(Tensor(1, 2, {-1.0, 2.0}));
  CHECK(tape.value(tape.relu(x)).data == std::vector<double>{0.0, 2.0});
}

TEST_CASE("softmax cross entropy examples") {
  Tape tape;
  Tensor label(1, 2, {1.0, 0.0});
  Var l = tape.softmax_cross_entropy(tape.constant(Tensor(1, 2, {0.0, 0.0})), label);
  CHECK(tape.value(l).data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  Var s = tape.softmax_cross_entropy(tape.constant(Tensor(1, 2, {1e3, -1e3})), label);
  CHECK(std::isfinite(tape.value(s).data[0]));
  CHECK(tape.value(s).data[0] == doctest::Approx(0.0));
  CHECK_THROWS_AS(tape.softmax_cross_entropy(tape.constant(Tensor(1, 2, {0.0, 0.0})), Tensor(1, 2, {0.5, 0.5})),
                  ConfigError);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(1);
  auto t = random_tensor(20, 7, rng, 50.0);
  auto p = softmax_rows(t);
  for (std::size_t r = 0; r < p.rows; ++r) {
    double s = 0.0;
    for (double x : p.row_span(r)) s += x;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("shape errors name the op") {
  Tape tape;
  Var a = tape.constant(Tensor(2, 3));
  Var b = tape.constant(Tensor(2, 3));
  try {
    tape.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
  CHECK_THROWS_AS(tape.add(a, tape.constant(Tensor(3, 2))), ShapeError);
  CHECK_THROWS_AS(tape.circular_convolve(tape.constant(Tensor(1, 4)), tape.constant(Tensor(1, 8))), ShapeError);
}

TEST_CASE("per-op gradients match finite differences") {
  {
    auto p = make_params({{3, 4}, {4, 5}}, 1);
    check_op("matmul", p, [](Tape& t, std::vector<Var>& v) { return t.matmul(v[0], v[1]); });
  }
  {
    auto p = make_params({{3, 4}, {3, 4}}, 2);
    check_op("add", p, [](Tape& t, std::vector<Var>& v) { return t.add(v[0], v[1]); });
    check_op("mul", p, [](Tape& t, std::vector<Var>& v) { return t.mul(v[0], v[1]); });
    check_op("mul self", p, [](Tape& t, std::vector<Var>& v) { return t.mul(v[0], v[0]); });
  }
  {
    auto p = make_params({{3, 4}, {1, 4}}, 3);
    check_op("add_row", p, [](Tape& t, std::vector<Var>& v) { return t.add_row(v[0], v[1]); });
  }
  {
    auto p = make_params({{3, 5}}, 4);
    check_op("scale", p, [](Tape& t, std::vector<Var>& v) { return t.scale(v[0], -2.5); });
    check_op("sigmoid", p, [](Tape& t, std::vector<Var>& v) { return t.sigmoid(v[0]); });
    check_op("tanh", p, [](Tape& t, std::vector<Var>& v) { return t.tanh(v[0]); });
    check_op("relu", p, [](Tape& t, std::vector<Var>& v) { return t.relu(v[0]); });
    check_op("slice", p, [](Tape& t, std::vector<Var>& v) { return t.slice(v[0], 1, 4); });
    check_op("slice_rows", p, [](Tape& t, std::vector<Var>& v) { return t.slice_rows(v[0], 1, 3); });
    check_op("signed_sqrt", p, [](Tape& t, std::vector<Var>& v) { return t.signed_sqrt(v[0], 1e-2); });
    check_op("l2_normalize_rows", p, [](Tape& t, std::vector<Var>& v) { return t.l2_normalize_rows(v[0], 1e-12); });
    check_op("sum", p, [](Tape& t, std::vector<Var>& v) { return t.sum(v[0]); });
  }
  {
    auto p = make_params({{2, 3}, {2, 2}, {2, 4}}, 5);
    check_op("concat", p, [](Tape& t, std::vector<Var>& v) {
      std::vector<Var> parts = {v[0], v[1], v[2]};
      return t.concat(parts);
    });
  }
  {
    auto p = make_params({{6, 3}}, 6);
    check_op("lookup", p, [](Tape& t, std::vector<Var>& v) {
      std::vector<int> ids = {0, 2, 2, 5};
      return t.lookup(v[0], ids, 4);
    });
  }
  {
    auto p = make_params({{3, 4}, {3, 4}}, 7);
    check_op("select_rows", p, [](Tape& t, std::vector<Var>& v) {
      std::vector<std::uint8_t> keep = {1, 0, 1};
      return t.select_rows(keep, v[0], v[1]);
    });
  }
  {
    auto p = make_params({{2, 5}}, 8);
    check_op("scatter_signed", p, [](Tape& t, std::vector<Var>& v) {
      std::vector<std::uint32_t> idx = {0, 3, 3, 1, 7};
      std::vector<double> sign = {1, -1, 1, -1, 1};
      return t.scatter_signed(v[0], idx, sign, 8);
    });
  }
  {
    auto p = make_params({{2, 8}, {2, 8}}, 9);
    check_op("circular_convolve", p, [](Tape& t, std::vector<Var>& v) { return t.circular_convolve(v[0], v[1]); });
  }
  {
    auto p = make_params({{4, 3}}, 10);
    check_op("softmax_cross_entropy", p, [](Tape& t, std::vector<Var>& v) {
      Tensor labels(4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0});
      return t.softmax_cross_entropy(v[0], labels);
    });
  }
}

TEST_CASE("lookup leaves the frozen row without gradient") {
  Rng rng(3);
  Parameter table("E", random_tensor(4, 2, rng));
  Tape tape;
  std::vector<int> ids = {3, 1, 3};
  Var out = tape.lookup(tape.param(table), ids, 3);
  tape.backward(tape.sum(out));
  CHECK(table.grad.at(3, 0) == 0.0);
  CHECK(table.grad.at(3, 1) == 0.0);
  CHECK(table.grad.at(1, 0) == 1.0);
}

TEST_CASE("gradient checker: linear layer and constant function") {
  Rng rng(2);
  Parameter w("w", random_tensor(3, 2, rng));
  Tensor x = random_tensor(4, 3, rng);
  std::vector<Parameter*> ps = {&w};
  auto lin = check_gradients(
      ps, [&](Tape& t) { return readout(t, t.matmul(t.constant(x), t.param(w)), 5); }, 1e-4, 1e-4);
  CHECK(lin.passed);
  CHECK(lin.max_rel_error < 1e-4);

  auto flat = check_gradients(
      ps, [&](Tape& t) {
        t.param(w);
        return t.constant(Tensor(1, 1, 3.0));
      },
      1e-4, 1e-4);
  CHECK(flat.passed);
  CHECK(flat.max_rel_error == 0.0);
  CHECK(w.grad.data == std::vector<double>(6, 0.0));
}

TEST_CASE("gradient accumulation is linear") {
  Rng rng(12);
  Parameter a("a", random_tensor(2, 3, rng));
  auto f = [&](Tape& t, double k) { return t.scale(t.sum(t.tanh(t.param(a))), k); };

  a.zero_grad();
  {
    Tape t;
    Var l1 = f(t, 1.0);
    Var l2 = f(t, 2.0);
    t.backward(t.add(l1, l2));
  }
  Tensor joint = a.grad;

  a.zero_grad();
  {
    Tape t;
    t.backward(f(t, 1.0));
  }
  {
    Tape t;
    t.backward(f(t, 2.0));
  }
  for (std::size_t i = 0; i < joint.size(); ++i) CHECK(joint.data[i] == doctest::Approx(a.grad.data[i]).epsilon(1e-14));
}

TEST_CASE("parameter off the tape gets zero gradient") {
  Rng rng(1);
  Parameter used("u", random_tensor(1, 2, rng));
  Parameter unused("n", random_tensor(1, 2, rng));
  used.zero_grad();
  unused.zero_grad();
  Tape t;
  t.backward(t.sum(t.param(used)));
  CHECK(unused.grad.data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("circular convolution examples") {
  std::vector<double> impulse = {1, 0, 0, 0}, b = {3, -1, 4, 2};
  auto r = circular_convolve(impulse, b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r[i] == doctest::Approx(b[i]).epsilon(1e-12));
  std::vector<double> x = {1, 2}, y = {3, 4};
  auto z = circular_convolve(x, y);
  CHECK(z[0] == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(10.0).epsilon(1e-12));
  std::vector<double> three = {1, 2, 3};
  CHECK_THROWS(circular_convolve(three, three));
  std::vector<double> four = {1, 2, 3, 4};
  CHECK_THROWS(circular_convolve(x, four));
}

TEST_CASE("circular convolution is commutative and correlate is its adjoint") {
  Rng rng(33);
  for (std::size_t d = 2; d <= 64; d *= 2) {
    std::vector<double> a(d), b(d), g(d);
    for (std::size_t i = 0; i < d; ++i) a[i] = rng.normal(), b[i] = rng.normal(), g[i] = rng.normal();
    auto ab = circular_convolve(a, b), ba = circular_convolve(b, a);
    for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(ab[i] - ba[i]) < 1e-10);
    // <g, a*b> == <corr(g, b), a>
    auto cg = circular_correlate(g, b);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < d; ++i) lhs += g[i] * ab[i], rhs += cg[i] * a[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("fft round trip") {
  Rng rng(4);
  std::vector<std::complex<double>> x(32);
  for (auto& v : x) v = {rng.normal(), rng.normal()};
  auto y = x;
  fft_inplace(y, false);
  fft_inplace(y, true);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) < 1e-12);
  CHECK(is_power_of_two(1));
  CHECK(is_power_of_two(256));
  CHECK_FALSE(is_power_of_two(0));
  CHECK_FALSE(is_power_of_two(12));
}

TEST_CASE("gradient check skips elements whose stencil crosses a relu kink") {
  Tensor v(1, 3);
  v.data = {1e-7, 0.5, -0.4};
  Parameter p("x", v);
  std::vector<Parameter*> ptrs = {&p};
  auto report = check_gradients(ptrs, [&](Tape& t) { return t.sum(t.relu(t.param(p))); }, 1e-5, 1e-4);
  CHECK(report.skipped_kinks == 1);
  CHECK(report.checked == 2);
  CHECK(report.max_rel_error < 1e-9);
}
