#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"

using namespace sensordrop;
using sdtest::away_from_zero;
using sdtest::random_tensor;

namespace {

Network single(const Shape& in, Layer layer, Rng& rng) {
  std::vector<Layer> ls;
  ls.push_back(std::move(layer));
  Network n(in, std::move(ls));
  n.init(rng);
  return n;
}

// Textbook convolution used as an oracle: explicit zero padding, no
// loop-bound tricks.
Tensor naive_conv(const Conv2D& c, const Tensor& x) {
  const std::size_t H = x.dim(1), W = x.dim(2);
  const long pad = static_cast<long>(c.kernel / 2);
  Tensor y({c.out_channels, H, W});
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t s = 0; s < W; ++s) {
        double acc = c.bias[o];
        for (std::size_t i = 0; i < c.in_channels; ++i) {
          for (std::size_t a = 0; a < c.kernel; ++a) {
            for (std::size_t b = 0; b < c.kernel; ++b) {
              const long rr = static_cast<long>(r + a) - pad;
              const long ss = static_cast<long>(s + b) - pad;
              if (rr < 0 || ss < 0 || rr >= static_cast<long>(H) || ss >= static_cast<long>(W)) {
                continue;
              }
              const std::size_t wi = ((o * c.in_channels + i) * c.kernel + a) * c.kernel + b;
              acc += c.weight[wi] * x.at(i, static_cast<std::size_t>(rr), static_cast<std::size_t>(ss));
            }
          }
        }
        y.at(o, r, s) = acc;
      }
    }
  }
  return y;
}

LossFn random_linear_loss(const Shape& out, Rng& rng) {
  return linear_loss(random_tensor(out, rng));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

TEST(Tensor, ShapeProductMatchesDataLength) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(shape_size(t.shape()), t.size());
  EXPECT_THROW(Tensor({2, 0, 3}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor t = Tensor::vector({1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({2, 3});
  EXPECT_EQ(r.shape(), (Shape{2, 3}));
  EXPECT_EQ(r.values(), t.values());
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(Rng(42).next_u64(), c.next_u64());
  EXPECT_NE(derive_seed(1, "train", 0), derive_seed(1, "test", 0));
  EXPECT_NE(derive_seed(1, "train", 0), derive_seed(1, "train", 1));
  EXPECT_EQ(derive_seed(9, "x", 3), derive_seed(9, "x", 3));
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

// ---------------------------------------------------------------------------
// Forward examples

TEST(Forward, DenseIdentity) {
  Dense d(3, 3);
  d.weight = Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Network n({3}, {d});
  EXPECT_EQ(n.predict(Tensor::vector({1, 2, 3})), Tensor::vector({1, 2, 3}));
}

TEST(Forward, ReLU) {
  Network n({3}, {ReLU{}});
  EXPECT_EQ(n.predict(Tensor::vector({-1, 0, 2})), Tensor::vector({0, 0, 2}));
}

TEST(Forward, SoftmaxUniform) {
  Network n({4}, {Softmax{}});
  EXPECT_EQ(n.predict(Tensor::vector({0, 0, 0, 0})), Tensor::vector({0.25, 0.25, 0.25, 0.25}));
}

TEST(Forward, SigmoidOfZeroIsHalf) {
  Network n({2}, {Sigmoid{}});
  EXPECT_EQ(n.predict(Tensor::vector({0, 0})), Tensor::vector({0.5, 0.5}));
}

TEST(Forward, ConvMatchesNaiveOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    for (std::size_t k : {1u, 3u, 5u}) {
      Conv2D c(3, 4, k);
      c.init(rng);
      for (double& b : c.bias.data()) b = rng.uniform(-1, 1);
      const Tensor x = random_tensor({3, 7, 6}, rng);
      const Tensor fast = c.forward(x);
      const Tensor slow = naive_conv(c, x);
      for (std::size_t i = 0; i < fast.size(); ++i) ASSERT_NEAR(fast[i], slow[i], 1e-12);
    }
  }
}

TEST(Forward, MaxPoolEqualsBruteForceWindowMax) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t window = 1 + rng.below(3);
    const Shape in{1 + rng.below(3), window * (1 + rng.below(4)) + rng.below(window),
                   window * (1 + rng.below(4)) + rng.below(window)};
    const Tensor x = random_tensor(in, rng);
    const Tensor y = MaxPool2D{window}.forward(x);
    ASSERT_EQ(y.shape(), (Shape{in[0], in[1] / window, in[2] / window}));
    for (std::size_t c = 0; c < y.dim(0); ++c) {
      for (std::size_t i = 0; i < y.dim(1); ++i) {
        for (std::size_t j = 0; j < y.dim(2); ++j) {
          double best = -INFINITY;
          for (std::size_t r = i * window; r < (i + 1) * window; ++r) {
            for (std::size_t s = j * window; s < (j + 1) * window; ++s) {
              best = std::max(best, x.at(c, r, s));
            }
          }
          ASSERT_EQ(y.at(c, i, j), best);
        }
      }
    }
  }
}

TEST(Forward, SoftmaxRowsAreDistributions) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_tensor({5, 7}, rng, -30.0, 30.0);
    const Tensor y = Softmax{}.forward(x);
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        ASSERT_GE(y[r * 7 + c], 0.0);
        s += y[r * 7 + c];
      }
      ASSERT_NEAR(s, 1.0, 1e-12);
    }
  }
  // Large logits must not overflow.
  const Tensor y = Softmax{}.forward(Tensor::vector({1000, 0, -1000}));
  EXPECT_TRUE(y.all_finite());
  EXPECT_NEAR(y[0], 1.0, 1e-12);
}

TEST(Forward, Deterministic) {
  Rng rng(8);
  std::vector<Layer> ls;
  append_convp(ls, 2, 4);
  ls.emplace_back(ReLU{});
  ls.emplace_back(Dense(4 * 4 * 4, 3));
  ls.emplace_back(Softmax{});
  Network n({2, 8, 8}, std::move(ls));
  n.init(rng);
  const Tensor x = random_tensor({2, 8, 8}, rng);
  const Tensor a = n.predict(x);
  const Tensor b = n.predict(x);
  EXPECT_EQ(a, b);
  EXPECT_EQ(n.forward(x), a);
}

TEST(Forward, InputShapeMismatchNamesLayer) {
  Rng rng(1);
  std::vector<Layer> ls;
  append_convp(ls, 2, 4);
  Network n({2, 8, 8}, std::move(ls));
  try {
    n.predict(Tensor({3, 8, 8}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0 (Conv2D)"), std::string::npos) << e.what();
  }
}

TEST(Forward, InconsistentChainRejectedAtConstruction) {
  std::vector<Layer> ls;
  ls.emplace_back(Conv2D(1, 4, 3));
  ls.emplace_back(Conv2D(5, 4, 3));
  try {
    Network n({1, 8, 8}, std::move(ls));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(Forward, ConvPIsConvThenPool) {
  std::vector<Layer> ls;
  append_convp(ls, 3, 5, 3, 2);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(kind_of(ls[0]), LayerKind::Conv2D);
  EXPECT_EQ(kind_of(ls[1]), LayerKind::MaxPool2D);
  Network n({3, 16, 16}, std::move(ls));
  EXPECT_EQ(n.output_shape(), (Shape{5, 8, 8}));
}

// ---------------------------------------------------------------------------
// Backward examples

TEST(Backward, DenseRowGradient) {
  Dense d(2, 3);
  Network n({2}, {d});
  n.forward(Tensor::vector({1, 2}));
  const Gradients g = n.backward(Tensor::vector({1, 0, 0}));
  const Tensor& gw = g.params[0];
  EXPECT_EQ(gw[0], 1.0);
  EXPECT_EQ(gw[1], 2.0);
  for (std::size_t i = 2; i < 6; ++i) EXPECT_EQ(gw[i], 0.0);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(2);
  std::vector<Network> nets;
  nets.push_back(single({2, 6, 6}, Conv2D(2, 3, 3), rng));
  nets.push_back(single({2, 6, 6}, MaxPool2D{2}, rng));
  nets.push_back(single({2, 3, 3}, Dense(18, 4), rng));
  nets.push_back(single({5}, ReLU{}, rng));
  nets.push_back(single({5}, Sigmoid{}, rng));
  nets.push_back(single({5}, Softmax{}, rng));
  for (auto& n : nets) {
    n.forward(random_tensor(n.input_shape(), rng));
    const Gradients g = n.backward(Tensor(n.output_shape()));
    for (const auto& t : g.params) {
      for (double v : t.data()) ASSERT_EQ(v, 0.0);
    }
    for (double v : g.input.data()) ASSERT_EQ(v, 0.0);
  }
}

TEST(Backward, BeforeForwardIsUsageError) {
  Network n({3}, {ReLU{}});
  EXPECT_THROW(n.backward(Tensor({3})), UsageError);
  ForwardCache empty;
  EXPECT_THROW(n.backward(empty, Tensor({3})), UsageError);
}

TEST(Backward, DoesNotMutateParameters) {
  Rng rng(4);
  Network n = single({2, 6, 6}, Conv2D(2, 3, 3), rng);
  std::vector<Tensor> before;
  for (const Tensor* p : std::as_const(n).parameters()) before.push_back(*p);
  n.forward(random_tensor({2, 6, 6}, rng));
  n.backward(random_tensor({3, 6, 6}, rng));
  const auto after = std::as_const(n).parameters();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(*after[i], before[i]);
}

TEST(Backward, WrongGradShapeRejected) {
  Network n({3}, {ReLU{}});
  n.forward(Tensor({3}));
  EXPECT_THROW(n.backward(Tensor({4})), ShapeError);
}

// ---------------------------------------------------------------------------
// Gradient checks

TEST(GradCheck, Conv3x3On8x8Seed0) {
  Rng rng(0);
  Network n = single({2, 8, 8}, Conv2D(2, 3, 3), rng);
  const Tensor x = random_tensor({2, 8, 8}, rng);
  GradCheckOptions opt;
  opt.include_input = true;
  const auto r = gradient_check(n, x, random_linear_loss(n.output_shape(), rng), opt);
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_EQ(r.coordinates_checked, 2u * 3 * 9 + 3 + 2 * 64);
}

TEST(GradCheck, SingleDenseQuadraticLoss) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Network n = single({5}, Dense(5, 4), rng);
    const auto r = gradient_check(n, random_tensor({5}, rng),
                                  quadratic_loss(random_tensor({4}, rng)),
                                  {.include_input = true});
    EXPECT_LT(r.max_relative_error, 1e-6) << "seed " << seed;
  }
}

TEST(GradCheck, EmptyNetworkIsVacuous) {
  Network n({3}, {});
  const auto r = gradient_check(n, Tensor::vector({1, 2, 3}), linear_loss(Tensor::vector({1, 1, 1})));
  EXPECT_EQ(r.max_relative_error, 0.0);
  EXPECT_EQ(r.coordinates_checked, 0u);
}

TEST(GradCheck, EveryLayerKindTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    struct Case {
      const char* name;
      Network net;
      Tensor input;
    };
    std::vector<Case> cases;
    {
      Network n = single({3, 6, 5}, Conv2D(3, 2, 3), rng);
      for (double& b : n.parameters()[1]->data()) b = rng.uniform(-1, 1);
      cases.push_back({"Conv2D", std::move(n), random_tensor({3, 6, 5}, rng)});
    }
    cases.push_back({"Conv2D k5", single({1, 7, 7}, Conv2D(1, 2, 5), rng), random_tensor({1, 7, 7}, rng)});
    cases.push_back({"MaxPool2D", single({2, 6, 6}, MaxPool2D{2}, rng), random_tensor({2, 6, 6}, rng)});
    cases.push_back({"Dense", single({2, 3, 2}, Dense(12, 5), rng), random_tensor({2, 3, 2}, rng)});
    cases.push_back({"ReLU", single({4, 3}, ReLU{}, rng), away_from_zero({4, 3}, rng)});
    cases.push_back({"Sigmoid", single({7}, Sigmoid{}, rng), random_tensor({7}, rng, -4, 4)});
    cases.push_back({"Softmax", single({6}, Softmax{}, rng), random_tensor({6}, rng, -3, 3)});
    cases.push_back({"Softmax rows", single({3, 4}, Softmax{}, rng), random_tensor({3, 4}, rng, -3, 3)});
    for (auto& c : cases) {
      GradCheckOptions opt;
      opt.include_input = true;
      const auto r = gradient_check(c.net, c.input, random_linear_loss(c.net.output_shape(), rng), opt);
      EXPECT_LT(r.max_relative_error, 1e-4) << c.name << " seed " << seed;
      EXPECT_GT(r.coordinates_checked, 0u);
    }
  }
}

TEST(GradCheck, ParametersRestoredBitExactly) {
  Rng rng(6);
  Network n = single({4}, Dense(4, 3), rng);
  std::vector<Tensor> before;
  for (const Tensor* p : std::as_const(n).parameters()) before.push_back(*p);
  gradient_check(n, random_tensor({4}, rng), linear_loss(random_tensor({3}, rng)));
  const auto after = std::as_const(n).parameters();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(*after[i], before[i]);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // A loss whose reported gradient is deliberately doubled must be flagged.
  Rng rng(7);
  Network n = single({3}, Dense(3, 2), rng);
  LossFn bad = [](const Tensor& y, Tensor* g) {
    if (g) *g = Tensor(y.shape(), 2.0);
    double s = 0.0;
    for (double v : y.data()) s += v;
    return s;
  };
  EXPECT_GT(gradient_check(n, random_tensor({3}, rng), bad).max_relative_error, 0.5);
}

TEST(GradCheck, KinkStraddlingCoordinatesAreSkippedOnlyOnRequest) {
  // ReLU input sits 3e-6 above zero, inside the 1e-5 probe.
  Rng rng(8);
  Network n({1}, {Dense(1, 1), ReLU{}});
  n.init(rng);
  (*n.parameters()[0])[0] = 1.0;
  (*n.parameters()[1])[0] = -1.0 + 3e-6;
  const Tensor x = Tensor::vector({1.0});
  const auto loss = linear_loss(Tensor::vector({1.0}));

  const auto naive = gradient_check(n, x, loss);
  EXPECT_GT(naive.max_relative_error, 0.1);
  EXPECT_EQ(naive.kinks_skipped, 0u);

  GradCheckOptions opt;
  opt.skip_kinks = true;
  const auto aware = gradient_check(n, x, loss, opt);
  EXPECT_EQ(aware.kinks_skipped, 2u);
  EXPECT_EQ(aware.coordinates_checked, 0u);

  // Away from the kink nothing is skipped.
  (*n.parameters()[1])[0] = -0.5;
  const auto smooth = gradient_check(n, x, loss, opt);
  EXPECT_EQ(smooth.kinks_skipped, 0u);
  EXPECT_EQ(smooth.coordinates_checked, 2u);
  EXPECT_LT(smooth.max_relative_error, 1e-8);
}

TEST(GradCheck, NearTiedPoolWindowIsAKink) {
  Network n({1, 2, 2}, {MaxPool2D{2}});
  Tensor x({1, 2, 2});
  x[0] = 1.0;
  x[1] = 1.0 + 4e-6;
  GradCheckOptions opt;
  opt.include_input = true;
  opt.skip_kinks = true;
  const auto r = gradient_check(n, x, linear_loss(Tensor::vector({1.0}).reshaped({1, 1, 1})), opt);
  EXPECT_EQ(r.kinks_skipped, 2u);  // the two near-tied entries
  EXPECT_EQ(r.coordinates_checked, 2u);
  EXPECT_EQ(r.max_relative_error, 0.0);
}

// ---------------------------------------------------------------------------
// Optimizers

TEST(Optimizer, SgdExample) {
  Tensor p = Tensor::vector({1.0});
  std::vector<Tensor*> ps{&p};
  Optimizer opt({OptimizerKind::SGD, 0.1}, ps);
  opt.step(ps, {Tensor::vector({2.0})});
  EXPECT_DOUBLE_EQ(p[0], 0.8);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Optimizer, AdamFirstStepIsLrTimesSign) {
  for (double g : {3.0, -0.02, 1e-3, -250.0}) {
    Tensor p = Tensor::vector({0.5});
    std::vector<Tensor*> ps{&p};
    Optimizer opt({OptimizerKind::Adam, 1e-3}, ps);
    opt.step(ps, {Tensor::vector({g})});
    // bias-corrected m/sqrt(v) = g/|g| up to epsilon
    const double expected = 0.5 - 1e-3 * g / (std::abs(g) + 1e-8);
    EXPECT_NEAR(p[0], expected, 1e-15);
    EXPECT_NEAR(std::abs(p[0] - 0.5), 1e-3, 1e-8);
  }
}

TEST(Optimizer, RmsPropFirstStep) {
  // v = 0.1 g^2, step = lr * g / (sqrt(v) + eps)
  Tensor p = Tensor::vector({0.0});
  std::vector<Tensor*> ps{&p};
  Optimizer opt({OptimizerKind::RMSProp, 1e-4}, ps);
  const double g = 0.3;
  opt.step(ps, {Tensor::vector({g})});
  EXPECT_NEAR(p[0], -1e-4 * g / (std::sqrt(0.1 * g * g) + 1e-8), 1e-18);
}

TEST(Optimizer, ZeroGradientIsFixedPoint) {
  for (auto kind : {OptimizerKind::SGD, OptimizerKind::Adam, OptimizerKind::RMSProp}) {
    Rng rng(1);
    Tensor p = random_tensor({3, 2}, rng);
    const Tensor before = p;
    std::vector<Tensor*> ps{&p};
    Optimizer opt({kind, 0.5}, ps);
    for (int i = 0; i < 5; ++i) opt.step(ps, {Tensor({3, 2})});
    EXPECT_EQ(p, before) << optimizer_name(kind);
  }
}

TEST(Optimizer, ZeroLearningRateNeverChangesParameters) {
  for (auto kind : {OptimizerKind::SGD, OptimizerKind::Adam, OptimizerKind::RMSProp}) {
    Rng rng(2);
    Tensor a = random_tensor({4}, rng), b = random_tensor({2, 2}, rng);
    const Tensor a0 = a, b0 = b;
    std::vector<Tensor*> ps{&a, &b};
    Optimizer opt({kind, 0.0}, ps);
    for (int i = 0; i < 20; ++i) opt.step(ps, {random_tensor({4}, rng), random_tensor({2, 2}, rng)});
    EXPECT_EQ(a, a0);
    EXPECT_EQ(b, b0);
  }
}

TEST(Optimizer, AccumulatorsMirrorParameterShapes) {
  Tensor a({3, 4}), b({5});
  std::vector<Tensor*> ps{&a, &b};
  Optimizer adam({OptimizerKind::Adam, 1e-3}, ps);
  ASSERT_EQ(adam.first_moments().size(), 2u);
  ASSERT_EQ(adam.second_moments().size(), 2u);
  EXPECT_EQ(adam.first_moments()[0].shape(), a.shape());
  EXPECT_EQ(adam.second_moments()[1].shape(), b.shape());
  Optimizer rms({OptimizerKind::RMSProp, 1e-3}, ps);
  EXPECT_EQ(rms.second_moments()[0].shape(), a.shape());
}

TEST(Optimizer, NonFiniteGradientAbortsWithoutTouchingParameters) {
  Tensor a = Tensor::vector({1, 2}), b = Tensor::vector({3});
  std::vector<Tensor*> ps{&a, &b};
  Optimizer opt({OptimizerKind::Adam, 1e-3}, ps);
  EXPECT_THROW(opt.step(ps, {Tensor::vector({1, 1}), Tensor::vector({NAN})}), DivergenceError);
  EXPECT_EQ(a, Tensor::vector({1, 2}));
  EXPECT_EQ(b, Tensor::vector({3}));
  EXPECT_EQ(opt.steps(), 0u);
  EXPECT_THROW(opt.step(ps, {Tensor::vector({INFINITY, 1}), Tensor::vector({0})}), DivergenceError);
}

TEST(Optimizer, ShapeMismatchRejected) {
  Tensor a({2});
  std::vector<Tensor*> ps{&a};
  Optimizer opt({OptimizerKind::SGD, 0.1}, ps);
  EXPECT_THROW(opt.step(ps, {Tensor({3})}), ShapeError);
  EXPECT_THROW(opt.step(ps, {}), ShapeError);
}

TEST(Optimizer, AdamMinimisesQuadratic) {
  Tensor p = Tensor::vector({3.0, -2.0});
  std::vector<Tensor*> ps{&p};
  Optimizer opt({OptimizerKind::Adam, 0.05}, ps);
  for (int i = 0; i < 2000; ++i) opt.step(ps, {Tensor::vector({2 * p[0], 2 * p[1]})});
  EXPECT_NEAR(p[0], 0.0, 1e-3);
  EXPECT_NEAR(p[1], 0.0, 1e-3);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

Network mixed_network(Rng& rng) {
  std::vector<Layer> ls;
  append_convp(ls, 2, 3);
  ls.emplace_back(ReLU{});
  ls.emplace_back(Dense(3 * 4 * 4, 5));
  ls.emplace_back(Sigmoid{});
  ls.emplace_back(Softmax{});
  Network n({2, 8, 8}, std::move(ls));
  n.init(rng);
  for (Tensor* p : n.parameters()) {
    for (double& v : p->data()) v += rng.uniform(-1e-3, 1e-3);
  }
  return n;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(12);
  const Network n = mixed_network(rng);
  std::stringstream ss;
  write_network(ss, n);
  const Network m = read_network(ss);
  ASSERT_EQ(m.layers().size(), n.layers().size());
  EXPECT_EQ(m.input_shape(), n.input_shape());
  const auto pa = n.parameters(), pb = m.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
  const Tensor x = random_tensor({2, 8, 8}, rng);
  EXPECT_EQ(n.predict(x), m.predict(x));
}

TEST(Checkpoint, LayoutHeaderIsLittleEndian) {
  Network n({3}, {ReLU{}});
  std::stringstream ss;
  write_network(ss, n);
  const std::string b = ss.str();
  const std::string expected("SDNN\x01\x00\x00\x00\x01\x00\x00\x00\x03\x00\x00\x00\x01\x00\x00\x00\x04", 21);
  EXPECT_EQ(b, expected);
}

TEST(Checkpoint, CorruptionIsReported) {
  Rng rng(13);
  std::stringstream ss;
  write_network(ss, mixed_network(rng));
  const std::string good = ss.str();

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  std::istringstream a(bad_magic);
  EXPECT_THROW(read_network(a), FormatError);

  std::string bad_version = good;
  bad_version[4] = 9;
  std::istringstream b(bad_version);
  EXPECT_THROW(read_network(b), FormatError);

  std::istringstream c(good.substr(0, good.size() - 3));
  EXPECT_THROW(read_network(c), FormatError);

  std::string bad_tag = good;
  bad_tag[4 + 4 + 4 + 3 * 4 + 4] = 77;
  std::istringstream d(bad_tag);
  EXPECT_THROW(read_network(d), FormatError);
}

TEST(Checkpoint, FileHelpers) {
  sdtest::TempDir dir("ckpt");
  Rng rng(14);
  const Network n = mixed_network(rng);
  save_network(dir / "net.sdnn", n);
  const Network m = load_network(dir / "net.sdnn");
  const Tensor x = random_tensor({2, 8, 8}, rng);
  EXPECT_EQ(n.predict(x), m.predict(x));
  EXPECT_THROW(load_network(dir / "missing.sdnn"), IoError);

  {
    std::ofstream os(dir / "net.sdnn", std::ios::binary | std::ios::app);
    os.put('\0');
  }
  EXPECT_THROW(load_network(dir / "net.sdnn"), FormatError);
}

TEST(Checkpoint, InconsistentShapesAreAFormatError) {
  // Dense(4 -> 2) declared on a 3-element input.
  Network n({4}, {Dense(4, 2)});
  std::stringstream ss;
  write_network(ss, n);
  std::string b = ss.str();
  b[12] = 3;  // first input dimension
  std::istringstream is(b);
  EXPECT_THROW(read_network(is), FormatError);
}
