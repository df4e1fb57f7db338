#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ego/checkpoint.hpp"
#include "ego/nn.hpp"
#include "ego/ops.hpp"
#include "ego/params.hpp"
#include "testutil.hpp"

#include <cstdio>
#include <filesystem>
#include <memory>

using namespace ego;

namespace {

Tensor<double> tensor_of(std::vector<int> shape, std::vector<double> vals) {
  return Tensor<double>(std::move(shape), std::move(vals));
}

}  // namespace

TEST_CASE("tensor shape and finiteness invariants") {
  TensorF t({2, 3});
  CHECK(t.numel() == 6);
  CHECK_THROWS_AS(TensorF({0, 3}), DimensionError);
  CHECK_THROWS_AS(TensorF({2}, {1.0f, 2.0f, 3.0f}), DimensionError);

  Tape<float> tape;
  TensorF bad({2});
  bad[0] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(tape.leaf(bad, false), NumericError);
}

TEST_CASE("conv2d identity kernel reproduces input") {
  Tape<double> tape;
  Rng rng = Rng::stream(7, "conv-id");
  Tensor<double> x = testutil::random_tensor({1, 4, 4}, rng);
  Var<double> vx = make_leaf(tape, x, false);
  Var<double> w = make_constant(tape, tensor_of({1, 1, 1, 1}, {1.0}));
  Var<double> b = make_constant(tape, Tensor<double>({1}));
  Var<double> y = conv2d(vx, w, b, 1);
  CHECK(y.value().shape() == std::vector<int>{1, 4, 4});
  for (int i = 0; i < 16; ++i) CHECK(y.value()[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("conv2d all-ones 3x3 kernel sums to 9") {
  Tape<double> tape;
  Var<double> x = make_constant(tape, Tensor<double>::full({1, 4, 4}, 1.0));
  Var<double> w = make_constant(tape, Tensor<double>::full({1, 1, 3, 3}, 1.0));
  Var<double> b = make_constant(tape, Tensor<double>({1}));
  Var<double> y = conv2d(x, w, b, 1);
  CHECK(y.value().shape() == std::vector<int>{1, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(y.value()[i] == doctest::Approx(9.0));
}

TEST_CASE("conv2d shape law for the heatmap-sized input") {
  Tape<float> tape;
  Var<float> x = make_constant(tape, TensorF({15, 47, 47}));
  Var<float> w = make_constant(tape, TensorF({64, 15, 4, 4}));
  Var<float> b = make_constant(tape, TensorF({64}));
  Var<float> y = conv2d(x, w, b, 2, 1);
  CHECK(y.value().shape() == std::vector<int>{64, 23, 23});
}

TEST_CASE("conv2d matches the direct-convolution oracle") {
  Rng rng = Rng::stream(11, "conv-oracle");
  for (int trial = 0; trial < 5; ++trial) {
    const int stride = 1 + trial % 2;
    const int pad = trial % 3 == 0 ? 1 : 0;
    Tensor<double> x = testutil::random_tensor({3, 6, 5}, rng);
    Tensor<double> w = testutil::random_tensor({4, 3, 3, 3}, rng);
    Tensor<double> b = testutil::random_tensor({4}, rng);
    Tensor<double> expect = testutil::conv2d_oracle(x, w, b, stride, pad);
    Tape<double> tape;
    Var<double> y = conv2d(make_leaf(tape, x, false), make_leaf(tape, w, false),
                           make_leaf(tape, b, false), stride, pad);
    REQUIRE(y.value().shape() == expect.shape());
    for (std::int64_t i = 0; i < expect.numel(); ++i)
      CHECK(y.value()[i] == doctest::Approx(expect[i]).epsilon(1e-10));
  }
}

TEST_CASE("deconv2d single source spreads the kernel") {
  Tape<double> tape;
  Var<double> x = make_constant(tape, tensor_of({1, 1, 1}, {2.5}));
  Var<double> w = make_constant(tape, Tensor<double>::full({1, 1, 2, 2}, 1.0));
  Var<double> b = make_constant(tape, Tensor<double>({1}));
  Var<double> y = deconv2d(x, w, b, 2);
  CHECK(y.value().shape() == std::vector<int>{1, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(y.value()[i] == doctest::Approx(2.5));
}

TEST_CASE("deconv2d matches the scattered-kernel oracle") {
  Rng rng = Rng::stream(13, "deconv-oracle");
  Tensor<double> x = testutil::random_tensor({2, 3, 3}, rng);
  Tensor<double> w = testutil::random_tensor({2, 3, 3, 3}, rng);
  Tensor<double> b = testutil::random_tensor({3}, rng);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      Tensor<double> expect = testutil::deconv2d_oracle(x, w, b, stride, pad);
      Tape<double> tape;
      Var<double> y = deconv2d(make_leaf(tape, x, false), make_leaf(tape, w, false),
                               make_leaf(tape, b, false), stride, pad);
      REQUIRE(y.value().shape() == expect.shape());
      for (std::int64_t i = 0; i < expect.numel(); ++i)
        CHECK(y.value()[i] == doctest::Approx(expect[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("conv/deconv adjoint identity") {
  Rng rng = Rng::stream(17, "adjoint");
  for (int trial = 0; trial < 4; ++trial) {
    const int stride = 1 + trial % 2, pad = trial / 2;
    const int A = 3, B = 2, k = 3, Ho = 3;
    // matched shapes: pick H so the conv shape law divides exactly
    const int H = stride * (Ho - 1) + k - 2 * pad;
    const int W = H;
    Tensor<double> x = testutil::random_tensor({A, Ho, Ho}, rng);
    Tensor<double> y = testutil::random_tensor({B, H, W}, rng);
    Tensor<double> w = testutil::random_tensor({A, B, k, k}, rng);
    Tensor<double> zero_a = Tensor<double>({A});
    Tensor<double> zero_b = Tensor<double>({B});
    Tape<double> tape;
    // <deconv(x; w), y> vs <x, conv(y; w)>
    Var<double> dx = deconv2d(make_leaf(tape, x, false), make_leaf(tape, w, false),
                              make_leaf(tape, zero_b, false), stride, pad);
    Var<double> cy = conv2d(make_leaf(tape, y, false), make_leaf(tape, w, false),
                            make_leaf(tape, zero_a, false), stride, pad);
    const double lhs = (dx.value().flat() * ConstArrayMap<double>(y.data(), y.numel())).sum();
    const double rhs = (cy.value().flat() * ConstArrayMap<double>(x.data(), x.numel())).sum();
    CHECK(std::abs(lhs - rhs) < 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("dense layer examples") {
  Tape<double> tape;
  SUBCASE("identity weight, zero bias") {
    Tensor<double> w({2, 2}, {1, 0, 0, 1});
    Var<double> y = dense(make_constant(tape, tensor_of({2}, {3.0, -2.0})),
                          make_constant(tape, w), make_constant(tape, Tensor<double>({2})));
    CHECK(y.value()[0] == doctest::Approx(3.0));
    CHECK(y.value()[1] == doctest::Approx(-2.0));
  }
  SUBCASE("hand matrix multiply") {
    Tensor<double> w({2, 2}, {1, 2, 3, 4});
    Var<double> y = dense(make_constant(tape, tensor_of({2}, {1.0, 1.0})),
                          make_constant(tape, w), make_constant(tape, Tensor<double>({2})));
    CHECK(y.value()[0] == doctest::Approx(3.0));
    CHECK(y.value()[1] == doctest::Approx(7.0));
  }
  SUBCASE("weight gradient is the outer product") {
    Tensor<double> x = tensor_of({2}, {0.5, -1.5});
    Tensor<double> w({3, 2}, {1, 0, 0, 1, 2, 2});
    Var<double> vw = make_leaf(tape, w, true);
    Var<double> y = dense(make_constant(tape, x), vw, make_constant(tape, Tensor<double>({3})));
    Var<double> loss = sum(y);
    tape.backward(loss.id);
    // upstream is all-ones: grad W = ones (x) x
    const auto& gw = tape.grad(vw.id);
    for (int r = 0; r < 3; ++r) {
      CHECK(gw[r * 2 + 0] == doctest::Approx(0.5));
      CHECK(gw[r * 2 + 1] == doctest::Approx(-1.5));
    }
  }
}

TEST_CASE("leaky_relu examples") {
  Tape<double> tape;
  Var<double> x = make_leaf(tape, tensor_of({3}, {-1.0, 0.0, 2.0}), true);
  Var<double> y = leaky_relu(x, 0.2);
  CHECK(y.value()[0] == doctest::Approx(-0.2));
  CHECK(y.value()[1] == doctest::Approx(0.0));
  CHECK(y.value()[2] == doctest::Approx(2.0));

  Tape<double> t2;
  Var<double> x2 = make_constant(t2, tensor_of({2}, {-3.0, 4.0}));
  Var<double> y2 = leaky_relu(x2, 0.0);  // plain ReLU
  CHECK(y2.value()[0] == doctest::Approx(0.0));
  CHECK(y2.value()[1] == doctest::Approx(4.0));

  Tape<double> t3;
  Var<double> x3 = make_leaf(t3, tensor_of({2}, {-1.0, 2.0}), true);
  Var<double> s3 = sum(leaky_relu(x3, 0.2));
  t3.backward(s3.id);
  CHECK(t3.grad(x3.id)[0] == doctest::Approx(0.2));
  CHECK(t3.grad(x3.id)[1] == doctest::Approx(1.0));
}

TEST_CASE("mse examples") {
  Tape<double> tape;
  Var<double> a = make_leaf(tape, tensor_of({2}, {0.0, 0.0}), true);
  Var<double> b = make_constant(tape, tensor_of({2}, {3.0, 4.0}));
  Var<double> l = mse(a, b);
  CHECK(l.value()[0] == doctest::Approx(12.5));
  tape.backward(l.id);
  // grad wrt a is 2(a-b)/N
  CHECK(tape.grad(a.id)[0] == doctest::Approx(-3.0));
  CHECK(tape.grad(a.id)[1] == doctest::Approx(-4.0));

  Tape<double> t2;
  Var<double> same = make_constant(t2, tensor_of({3}, {1, 2, 3}));
  CHECK(mse(same, same).value()[0] == doctest::Approx(0.0));
  CHECK_THROWS_AS(mse(same, make_constant(t2, Tensor<double>({2}))), DimensionError);
}

TEST_CASE("batchnorm semantics") {
  SUBCASE("constant channel maps to beta") {
    Tape<double> tape;
    BatchNormState<double> st(2);
    Tensor<double> x({4, 2});
    for (int b = 0; b < 4; ++b) {
      x[b * 2 + 0] = 7.0;
      x[b * 2 + 1] = -3.0;
    }
    Var<double> g = make_constant(tape, Tensor<double>::full({2}, 1.0));
    Var<double> be = make_constant(tape, tensor_of({2}, {0.25, -0.5}));
    Var<double> y = batchnorm(make_constant(tape, x), g, be, &st, true);
    for (int b = 0; b < 4; ++b) {
      CHECK(y.value()[b * 2 + 0] == doctest::Approx(0.25).epsilon(1e-6));
      CHECK(y.value()[b * 2 + 1] == doctest::Approx(-0.5).epsilon(1e-6));
    }
  }
  SUBCASE("normalizes batch statistics") {
    Tape<double> tape;
    BatchNormState<double> st(1);
    Rng rng = Rng::stream(3, "bn");
    Tensor<double> x({16, 1});
    for (int i = 0; i < 16; ++i) x[i] = 5.0 + 2.0 * rng.gaussian();
    Var<double> y = batchnorm(make_constant(tape, x),
                              make_constant(tape, Tensor<double>::full({1}, 1.0)),
                              make_constant(tape, Tensor<double>({1})), &st, true);
    const double m = y.value().flat().mean();
    const double v = (y.value().flat() - m).square().mean();
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::abs(std::sqrt(v) - 1.0) < 1e-3);  // eps shifts variance slightly
  }
  SUBCASE("train mode rejects batch of one") {
    Tape<double> tape;
    BatchNormState<double> st(1);
    CHECK_THROWS_AS(batchnorm(make_constant(tape, Tensor<double>({1, 1})),
                              make_constant(tape, Tensor<double>::full({1}, 1.0)),
                              make_constant(tape, Tensor<double>({1})), &st, true),
                    DimensionError);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("loss = sum(x^2) gives 2x") {
    Tape<double> tape;
    Tensor<double> x = tensor_of({3}, {1.0, -2.0, 0.5});
    Var<double> vx = make_leaf(tape, x, true);
    Var<double> loss = sum(square(vx));
    tape.backward(loss.id);
    for (int i = 0; i < 3; ++i) CHECK(tape.grad(vx.id)[i] == doctest::Approx(2.0 * x[i]));
  }
  SUBCASE("disconnected leaf gets a zero gradient") {
    Tape<double> tape;
    Var<double> used = make_leaf(tape, tensor_of({2}, {1, 2}), true);
    Var<double> unused = make_leaf(tape, tensor_of({3}, {1, 2, 3}), true);
    Var<double> loss = sum(used);
    tape.backward(loss.id);
    CHECK(tape.has_grad(unused.id));
    for (int i = 0; i < 3; ++i) CHECK(tape.grad(unused.id)[i] == 0.0);
  }
  SUBCASE("non-scalar loss rejected; repeated backward rejected") {
    Tape<double> tape;
    Var<double> x = make_leaf(tape, tensor_of({2}, {1, 2}), true);
    CHECK_THROWS_AS(tape.backward(x.id), DimensionError);
    Var<double> loss = sum(x);
    tape.backward(loss.id);
    CHECK_THROWS_AS(tape.backward(loss.id), NumericError);
  }
}

TEST_CASE("optimizer step follows the Adam rule") {
  SUBCASE("first step magnitude is about lr") {
    ParamStore<double> store;
    store.create("w", Tensor<double>::full({1}, 1.0));
    store.entry("w").grad[0] = 1.0;
    store.entry("w").has_grad = true;
    store.step(1e-3);
    CHECK(store.value("w")[0] == doctest::Approx(0.999).epsilon(1e-6));
  }
  SUBCASE("zero gradients leave parameters unchanged") {
    ParamStore<double> store;
    store.create("w", Tensor<double>::full({2}, 3.0));
    store.entry("w").has_grad = true;  // populated with zeros
    store.step(1e-2);
    CHECK(store.value("w")[0] == doctest::Approx(3.0));
  }
  SUBCASE("missing gradient is an error") {
    ParamStore<double> store;
    store.create("w", Tensor<double>::full({1}, 1.0));
    CHECK_THROWS_AS(store.step(1e-3), NumericError);
  }
  SUBCASE("repeated positive gradients decrease the parameter monotonically") {
    ParamStore<double> store;
    store.create("w", Tensor<double>::full({1}, 1.0));
    double prev = 1.0;
    for (int i = 0; i < 2; ++i) {
      store.entry("w").grad[0] = 0.7;
      store.entry("w").has_grad = true;
      store.step(1e-3);
      CHECK(store.value("w")[0] < prev);
      prev = store.value("w")[0];
    }
  }
}

TEST_CASE("xavier initialization") {
  TensorF a = xavier_init<float>({64, 32}, 42);
  TensorF b = xavier_init<float>({64, 32}, 42);
  for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);  // determinism

  const double bound = std::sqrt(6.0 / (64 + 32));
  CHECK((a.flat().abs() <= static_cast<float>(bound)).all());

  TensorF big = xavier_init<float>({100, 100}, 7);
  const double var = (big.flat().template cast<double>() -
                      big.flat().template cast<double>().mean())
                         .square()
                         .mean();
  const double expected = 2.0 / (100 + 100);
  CHECK(var == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("finite-difference checks across ops") {
  Rng rng = Rng::stream(23, "fd");
  double worst = 0.0;

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({2, 3, 5, 5}, rng), testutil::random_tensor({4, 3, 3, 3}, rng),
       testutil::random_tensor({4}, rng)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        return mul_scalar(sum(conv2d(v[0], v[1], v[2], 2, 1)), 0.5);
      }));

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({2, 2, 3, 3}, rng), testutil::random_tensor({2, 3, 4, 4}, rng),
       testutil::random_tensor({3}, rng)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        return mean(square(deconv2d(v[0], v[1], v[2], 2, 1)));
      }));

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({3, 4}, rng), testutil::random_tensor({5, 4}, rng),
       testutil::random_tensor({5}, rng)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        return sum(square(dense(v[0], v[1], v[2])));
      }));

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({6}, rng), testutil::random_tensor({6}, rng)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        return add(mse(v[0], v[1]), dot(mul(v[0], v[1]), sub(v[0], v[1])));
      }));

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({5}, rng, 0.2, 2.0)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        return sum(sqrt_op(v[0]));
      }));

  auto bn_state = std::make_shared<BatchNormState<double>>(3);
  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({4, 3}, rng), testutil::random_tensor({3}, rng, 0.5, 1.5),
       testutil::random_tensor({3}, rng)},
      [bn_state](Tape<double>& t, std::vector<Var<double>> v) {
        // train-mode forward ignores the running stats, so sharing is safe
        return sum(square(batchnorm(v[0], v[1], v[2], bn_state.get(), true)));
      }));

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({3}, rng), testutil::random_tensor({3}, rng)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        return dot(cross3(v[0], v[1]), v[0] + v[1]);
      }));

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({4}, rng), testutil::random_tensor({4}, rng)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        Var<double> q = quat_mul_op(v[0], quat_conj_op(v[1]));
        return norm(q, 1e-12);
      }));

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({6}, rng), testutil::random_tensor({1}, rng, 0.5, 2.0)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        Var<double> part = slice(v[0], 1, 3);
        Var<double> joined = concat<double>({part, vsdiv(slice(v[0], 3, 3), v[1])});
        return mean(square(smul(v[1], joined)));
      }));

  worst = std::max(worst, testutil::gradient_check(
      {testutil::random_tensor({3}, rng), testutil::random_tensor({3}, rng, 0.1, 0.9)},
      [](Tape<double>& t, std::vector<Var<double>> v) {
        return sum(leaky_relu(div(v[0], v[1]), 0.2));
      }));

  CHECK(worst < 1e-4);
}

TEST_CASE("forward determinism and statelessness") {
  Rng r1 = Rng::stream(5, "det");
  Rng r2 = Rng::stream(5, "det");
  Tensor<double> a = testutil::random_tensor({2, 3, 6, 6}, r1);
  Tensor<double> b = testutil::random_tensor({2, 3, 6, 6}, r2);
  for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

  Tensor<double> w = xavier_init<double>({4, 3, 3, 3}, 9);
  auto run = [&](const Tensor<double>& x) {
    Tape<double> tape;
    return conv2d(make_leaf(tape, x, false), make_constant(tape, w),
                  make_constant(tape, Tensor<double>({4})), 1, 0)
        .value();
  };
  Tensor<double> y1 = run(a);
  Tensor<double> y2 = run(a);
  for (std::int64_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  namespace fs = std::filesystem;
  ParamStore<float> store;
  Rng rng = Rng::stream(77, "ckpt");
  store.create("net.w", TensorF::gaussian({4, 3}, rng));
  store.create("net.b", TensorF::gaussian({4}, rng));
  store.entry("net.w").m = TensorF::gaussian({4, 3}, rng);
  store.entry("net.w").v = TensorF::gaussian({4, 3}, rng);
  auto& bn = store.bn_state("net.bn0", 3);
  bn.running_mean = TensorF::gaussian({3}, rng);
  store.set_step_count(123);

  const fs::path dir = fs::temp_directory_path() / "egopose_ckpt_test";
  fs::create_directories(dir);
  const std::string path = (dir / "test.ckpt").string();
  save_checkpoint(path, store, {{"stage", "unit"}});

  ParamStore<float> loaded;
  auto meta = load_checkpoint(path, loaded);
  CHECK(meta.at("stage") == "unit");
  CHECK(loaded.step_count() == 123);
  for (const auto& [name, e] : store.entries()) {
    const auto& l = loaded.entry(name);
    REQUIRE(l.value.shape() == e.value.shape());
    for (std::int64_t i = 0; i < e.value.numel(); ++i) {
      CHECK(l.value[i] == e.value[i]);
      CHECK(l.m[i] == e.m[i]);
      CHECK(l.v[i] == e.v[i]);
    }
  }
  for (std::int64_t i = 0; i < 3; ++i)
    CHECK(loaded.bn_states().at("net.bn0").running_mean[i] == bn.running_mean[i]);

  // byte-identical re-save
  const std::string path2 = (dir / "test2.ckpt").string();
  save_checkpoint(path2, loaded, {{"stage", "unit"}});
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}
