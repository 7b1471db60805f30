#include "doctest.h"
#include "fd_oracle.hpp"
#include "graph_fixtures.hpp"

#include "dpss/diffgraph.hpp"

#include <cmath>

using namespace dpss;
using namespace dpss::diffgraph;
using namespace dpss::testing;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST_CASE("x squared at 3") {
  Graph g;
  const auto x = g.input("x");
  const auto y = g.reduce_sum(g.mul(x, x));
  g.set_output("y", y);
  const Matrix three = scalar(3.0);
  Bindings<double> b;
  b.set("x", three);
  CHECK(g.forward(b).at("y")(0, 0) == 9.0);
  const auto r = g.gradient(b, y, {"x"});
  CHECK(r.value == 9.0);
  CHECK(r.gradients.at("x")(0, 0) == 6.0);
}

TEST_CASE("tanh derivative at zero") {
  Graph g;
  const auto y = g.reduce_sum(g.tanh(g.input("x")));
  const Matrix zero = scalar(0.0);
  Bindings<double> b;
  b.set("x", zero);
  CHECK(g.gradient(b, y, {"x"}).gradients.at("x")(0, 0) == 1.0);
}

TEST_CASE("empty reduction sums to zero") {
  Graph g;
  const auto y = g.reduce_sum(g.input("x"));
  g.set_output("y", y);
  const Matrix empty(0, 4);
  Bindings<double> b;
  b.set("x", empty);
  CHECK(g.forward(b).at("y")(0, 0) == 0.0);
}

TEST_CASE("three-layer MLP forward matches scalar re-evaluation") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Matrix x = random_matrix(rng, 3, 4);
    const Matrix w1 = random_matrix(rng, 5, 4), b1 = random_matrix(rng, 1, 5);
    const Matrix w2 = random_matrix(rng, 6, 5), b2 = random_matrix(rng, 1, 6);
    const Matrix w3 = random_matrix(rng, 2, 6), b3 = random_matrix(rng, 1, 2);
    Graph g;
    auto h = g.relu(g.affine(g.input("x"), g.input("w1"), g.input("b1")));
    h = g.tanh(g.affine(h, g.input("w2"), g.input("b2")));
    g.set_output("y", g.affine(h, g.input("w3"), g.input("b3")));
    Bindings<double> b;
    b.set("x", x).set("w1", w1).set("b1", b1).set("w2", w2).set("b2", b2).set("w3", w3).set("b3", b3);
    const Matrix y = g.forward(b).at("y");

    for (int r = 0; r < 3; ++r) {
      std::vector<double> a1(5), a2(6);
      for (int o = 0; o < 5; ++o) {
        double acc = b1(0, o);
        for (int i = 0; i < 4; ++i) acc += w1(o, i) * x(r, i);
        a1[o] = acc > 0.0 ? acc : 0.0;
      }
      for (int o = 0; o < 6; ++o) {
        double acc = b2(0, o);
        for (int i = 0; i < 5; ++i) acc += w2(o, i) * a1[i];
        a2[o] = std::tanh(acc);
      }
      for (int o = 0; o < 2; ++o) {
        double acc = b3(0, o);
        for (int i = 0; i < 6; ++i) acc += w3(o, i) * a2[i];
        CHECK(y(r, o) == doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("causal convolution only looks at strictly earlier frames") {
  Graph g;
  const auto y = g.causal_conv(g.input("x"), g.input("hist"), g.input("w"), g.input("b"), 2);
  g.set_output("y", y);
  Matrix x(3, 1), hist(2, 1), w(1, 2), b(1, 1);
  x << 1, 2, 3;
  hist << 10, 20;
  w << 100, 1;  // weights for frames n-2, n-1
  b << 0.5;
  Bindings<double> bind;
  bind.set("x", x).set("hist", hist).set("w", w).set("b", b);
  const Matrix out = g.forward(bind).at("y");
  CHECK(out(0, 0) == doctest::Approx(100 * 10 + 20 + 0.5));
  CHECK(out(1, 0) == doctest::Approx(100 * 20 + 1 + 0.5));
  CHECK(out(2, 0) == doctest::Approx(100 * 1 + 2 + 0.5));
}

TEST_CASE("gradients match central finite differences for every primitive") {
  for (Op op : differentiable_primitives()) {
    CAPTURE(op_name(op));
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      worst = std::max(worst, check_against_fd(random_primitive_graph(op, 1000 * static_cast<int>(op) + seed)));
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("gradient of summed graph copies is the sum of gradients") {
  Rng rng(5);
  const Matrix x = random_matrix(rng, 3, 3);
  const Matrix w = random_matrix(rng, 3, 3), b = random_matrix(rng, 1, 3);
  Graph one, two;
  const auto y1 = one.reduce_sum(one.tanh(one.affine(one.input("x"), one.input("w"), one.input("b"))));
  const auto xa = two.input("x"), wa = two.input("w"), ba = two.input("b");
  const auto p = two.reduce_sum(two.tanh(two.affine(xa, wa, ba)));
  const auto q = two.reduce_sum(two.sin(two.affine(xa, wa, ba)));
  const auto y2 = two.add(p, q);
  Graph three;
  const auto y3 = three.reduce_sum(three.sin(three.affine(three.input("x"), three.input("w"), three.input("b"))));

  Bindings<double> bind;
  bind.set("x", x).set("w", w).set("b", b);
  const auto g1 = one.gradient(bind, y1, {"x", "w"});
  const auto g2 = two.gradient(bind, y2, {"x", "w"});
  const auto g3 = three.gradient(bind, y3, {"x", "w"});
  for (const char* name : {"x", "w"}) {
    const Matrix sum = g1.gradients.at(name) + g3.gradients.at(name);
    CHECK((g2.gradients.at(name) - sum).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("forward and gradient are deterministic") {
  const auto rg = random_primitive_graph(Op::gru, 77);
  const auto bind = bind_all(rg.inputs);
  const auto a = rg.graph.gradient(bind, rg.output, {"x", "w_hh"});
  const auto b = rg.graph.gradient(bind, rg.output, {"x", "w_hh"});
  CHECK(a.value == b.value);
  CHECK(a.gradients.at("x") == b.gradients.at("x"));
  CHECK(a.gradients.at("w_hh") == b.gradients.at("w_hh"));
}

TEST_CASE("single precision evaluation agrees with double") {
  const auto rg = random_primitive_graph(Op::gru, 3);
  Bindings<float> bf;
  std::map<std::string, Tensor<float>> cast;
  for (const auto& [name, value] : rg.inputs) cast[name] = value.cast<float>();
  for (const auto& [name, value] : cast) bf.set(name, value);
  const auto rf = rg.graph.gradient(bf, rg.output, {"x"});
  const auto rd = rg.graph.gradient(bind_all(rg.inputs), rg.output, {"x"});
  CHECK(rf.value == doctest::Approx(rd.value).epsilon(1e-5));
  CHECK((rf.gradients.at("x").cast<double>() - rd.gradients.at("x")).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("error paths") {
  Graph g;
  const auto x = g.input("x");
  const auto w = g.input("w");
  const auto y = g.affine(x, w, g.input("b"));
  const auto unused = g.input("unused");
  (void)unused;
  g.set_output("y", y);
  const auto s = g.reduce_sum(y);

  const Matrix xv = Matrix::Ones(2, 3), wv = Matrix::Ones(4, 2), bv = Matrix::Ones(1, 4), uv = Matrix::Ones(1, 1);
  Bindings<double> bad;
  bad.set("x", xv).set("w", wv).set("b", bv).set("unused", uv);
  CHECK_THROWS_AS(g.forward(bad), Error);  // shape mismatch

  const Matrix wgood = Matrix::Ones(4, 3);
  Bindings<double> ok;
  ok.set("x", xv).set("w", wgood).set("b", bv).set("unused", uv);
  CHECK_NOTHROW(g.forward(ok));
  CHECK_THROWS_AS(g.gradient(ok, y, {"x"}), Error);          // non-scalar output
  CHECK_THROWS_AS(g.gradient(ok, s, {"unused"}), Error);     // unreachable input
  CHECK_THROWS_AS(g.gradient(ok, s, {"nope"}), Error);       // unknown input

  Bindings<double> missing;
  missing.set("x", xv);
  CHECK_THROWS_AS(g.forward(missing), Error);

  Node unknown;
  unknown.op = static_cast<Op>(250);
  CHECK_THROWS_AS(g.add(unknown), Error);

  Node dangling;
  dangling.op = Op::relu;
  dangling.args = {999};
  CHECK_THROWS_AS(g.add(dangling), Error);

  const Matrix nan = Matrix::Constant(2, 3, std::nan(""));
  Bindings<double> nonfinite;
  nonfinite.set("x", nan).set("w", wgood).set("b", bv).set("unused", uv);
  CHECK_THROWS_AS(g.forward(nonfinite), Error);
}
