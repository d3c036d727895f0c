#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "plumedial/dispersion.hpp"
#include "plumedial/rng.hpp"
#include "support/quadrature.hpp"

using namespace plumedial;

namespace {

DispersionParams reference_params() {
  DispersionParams p;
  p.source = Vec3(100.0, -40.0, 0.0);
  p.release_rate = 0.05;
  p.wind = PiecewiseConstant<Vec3>(Vec3(0.0, 1.5, 0.0));
  p.diffusion = PiecewiseLinear({0.0, 200.0}, {1.0, 80.0});
  p.width_spline = LinearSpline<kSplineKnots>({2.0, 4.0, 6.0, 8.5, 11.0}, p.plume_length);
  p.drift_spline = LinearSpline<kSplineKnots>({0.5, 2.0, 3.5, 5.0, 6.0}, p.plume_length);
  p.scatter_scale = 1.5e-3;
  return p;
}

DispersionParams random_params(CounterRng& rng) {
  DispersionParams p = reference_params();
  p.source = Vec3(rng.uniform(60.0, 140.0), rng.uniform(-60.0, -20.0), 0.0);
  p.release_rate = rng.uniform(0.01, 0.2);
  p.wind = PiecewiseConstant<Vec3>(Vec3(rng.uniform(-0.5, 0.5), rng.uniform(0.8, 2.5), 0.0));
  for (int k = 0; k < kSplineKnots; ++k) {
    p.width_spline.knots()[k] = rng.uniform(1.0, 4.0) + 2.0 * k;
    p.drift_spline.knots()[k] = rng.uniform(0.0, 2.0) * k;
  }
  return p;
}

}  // namespace

TEST_CASE("evaluate_puff normalisation and decay") {
  DispersionParams p;
  p.release_rate = 1.0;
  p.wind = PiecewiseConstant<Vec3>(Vec3(1.0, 0.0, 0.0));
  const double h = 1.0 / (2.0 * M_PI);
  p.diffusion = PiecewiseLinear(h);

  const double t = 3.0;
  const Vec3 center = p.source + p.wind.integral(t);
  CHECK(evaluate_puff(p, center, t) == Catch::Approx(1.0).epsilon(1e-12));

  // |x - m|^2 = 2 h gives a factor e^{-1}.
  const Vec3 off = center + Vec3(std::sqrt(2.0 * h), 0.0, 0.0);
  CHECK(evaluate_puff(p, off, t) == Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("evaluate_puff integrates to the released amount") {
  DispersionParams p;
  p.release_rate = 2.75;
  p.wind = PiecewiseConstant<Vec3>(Vec3(0.4, 0.2, 0.0));
  p.diffusion = PiecewiseLinear({0.0, 10.0}, {0.25, 4.0});

  const double t = 5.0;
  const double h = p.diffusion.value(t);
  const double sigma = std::sqrt(h);
  const Vec3 center = p.source + p.wind.integral(t);
  const Vec3 half(6.0 * sigma, 6.0 * sigma, 6.0 * sigma);
  const double mass = oracle::box_integral(
      [&](const Vec3& x) { return evaluate_puff(p, x, t); }, center - half, center + half, 128);
  CHECK(mass == Catch::Approx(p.release_rate).epsilon(1e-3));
}

TEST_CASE("evaluate_puff rejects degenerate inputs") {
  DispersionParams p;
  p.diffusion = PiecewiseLinear({0.0, 1.0}, {0.0, 0.0});
  CHECK_THROWS_AS(evaluate_puff(p, Vec3(), -1.0), std::domain_error);
  CHECK_THROWS_AS(evaluate_puff(p, Vec3(), 0.5), std::domain_error);
}

TEST_CASE("evaluate_puff is translation equivariant") {
  DispersionParams p = reference_params();
  const Vec3 shift(13.0, -7.0, 2.0);
  DispersionParams q = p;
  q.source += shift;
  const Vec3 x(104.0, -30.0, 3.0);
  CHECK(evaluate_puff(p, x, 40.0) ==
        Catch::Approx(evaluate_puff(q, x + shift, 40.0)).epsilon(1e-13));
}

TEST_CASE("discretize_release with a single puff matches evaluate_puff") {
  DispersionParams p = reference_params();
  // Make the puff width spline agree with sqrt(h) at the midpoint age so the
  // two routes describe the same Gaussian.
  const double duration = p.release_duration();
  const double age = 0.5 * duration;
  const Vec3 advect = p.wind.integral(age);
  const double downwind = std::hypot(advect.x, advect.y);
  const double sigma = std::sqrt(p.diffusion.value(age));
  for (auto& w : p.width_spline.knots()) w = sigma;
  for (auto& d : p.drift_spline.knots()) d = 0.0;

  const KernelField field = discretize_release(p, 1);
  REQUIRE(field.kernels.size() == 1);
  const Vec3 x = p.source + advect + Vec3(1.0, -2.0, 0.5);
  // One puff carries the whole release duration as weight.
  CHECK(evaluate_field(field, x) ==
        Catch::Approx(duration * evaluate_puff(p, x, age)).epsilon(1e-12));
  (void)downwind;
}

TEST_CASE("discretize_release with calm wind stacks puffs at the source") {
  DispersionParams p = reference_params();
  p.wind = PiecewiseConstant<Vec3>(Vec3(0.0, 0.0, 0.0));
  const KernelField field = discretize_release(p, 8);
  const Vec3 expect = p.source + Vec3(0.0, 0.0, p.drift_spline.knots()[0]);
  for (const GaussianPuff& k : field.kernels) {
    CHECK(norm(k.center - expect) < 1e-12);
    CHECK(k.bandwidth == Catch::Approx(p.width_spline.knots()[0]));
  }
}

TEST_CASE("discretize_release conserves the released mass") {
  CounterRng rng(7101);
  for (int trial = 0; trial < 8; ++trial) {
    DispersionParams p = random_params(rng);
    const KernelField field = discretize_release(p, 16);
    const double expected = p.release_rate * p.release_duration();
    // Analytic kernel mass, then a cross-check by quadrature on one draw.
    CHECK(field.kernel_mass() == Catch::Approx(expected).epsilon(1e-6));
    if (trial == 0) {
      Vec3 lo(1e30, 1e30, 1e30), hi(-1e30, -1e30, -1e30);
      for (const GaussianPuff& k : field.kernels) {
        const double pad = 7.0 * k.bandwidth;
        lo = Vec3(std::min(lo.x, k.center.x - pad), std::min(lo.y, k.center.y - pad),
                  std::min(lo.z, k.center.z - pad));
        hi = Vec3(std::max(hi.x, k.center.x + pad), std::max(hi.y, k.center.y + pad),
                  std::max(hi.z, k.center.z + pad));
      }
      KernelField no_ambient = field;
      no_ambient.constant = 0.0;
      const double mass =
          oracle::box_integral([&](const Vec3& x) { return no_ambient.evaluate(x); }, lo, hi, 160);
      CHECK(mass == Catch::Approx(expected).epsilon(1e-2));
    }
  }
}

TEST_CASE("evaluate_field basics") {
  KernelField field;
  field.constant = 0.7;
  CHECK(evaluate_field(field, Vec3(3.0, 1.0, -2.0)) == 0.7);

  field.kernels.push_back({Vec3(1.0, 2.0, 3.0), 2.0, 0.5});
  CHECK(evaluate_field(field, Vec3(1.0, 2.0, 3.0)) == Catch::Approx(1.2));

  KernelField two = field;
  two.kernels.push_back({Vec3(-1.0, 0.0, 1.0), 1.0, 0.25});
  KernelField second;
  second.kernels.push_back(two.kernels[1]);
  const Vec3 x(0.0, 1.0, 2.0);
  CHECK(evaluate_field(two, x) ==
        Catch::Approx(evaluate_field(field, x) + evaluate_field(second, x)));
}

TEST_CASE("kernel profile is a good kernel") {
  double prev = kernel_profile(0.0);
  CHECK(prev == 1.0);
  for (double x = 0.05; x < 8.0; x += 0.05) {
    const double v = kernel_profile(x);
    CHECK(v >= 0.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("line_integral closed forms") {
  KernelField field;
  field.cutoff_sigmas = 40.0;  // effectively untruncated
  const double h = 1.7;
  const double w = 0.6;
  field.kernels.push_back({Vec3(5.0, 1.0, 2.0), h, w});

  const Vec3 dir = normalized(Vec3(1.0, 0.2, -0.1));
  SECTION("through the centre") {
    const Vec3 origin = field.kernels[0].center - dir * 60.0;
    CHECK(line_integral(field, origin, dir, 0.0, 120.0) ==
          Catch::Approx(w * h * std::sqrt(2.0 * M_PI)).epsilon(1e-12));
  }
  SECTION("at perpendicular offset d") {
    const Frame frame(dir);
    const double d = 2.3;
    const Vec3 origin = field.kernels[0].center + frame.u * d - dir * 60.0;
    CHECK(line_integral(field, origin, dir, 0.0, 120.0) ==
          Catch::Approx(w * h * std::sqrt(2.0 * M_PI) * std::exp(-0.5 * d * d / (h * h)))
              .epsilon(1e-12));
  }
  SECTION("constant term scales with segment length") {
    field.constant = 0.25;
    const double base = line_integral(field, Vec3(), dir, 3.0, 3.0);
    CHECK(base == 0.0);
    CHECK(line_integral(field, Vec3(100.0, 100.0, 100.0), dir, 1.0, 5.0) ==
          Catch::Approx(0.25 * 4.0));
  }
}

TEST_CASE("line_integral matches adaptive quadrature on finite segments") {
  CounterRng rng(42);
  for (int trial = 0; trial < 12; ++trial) {
    KernelField field;
    field.constant = rng.uniform(0.0, 0.1);
    const int n = 1 + static_cast<int>(rng.uniform_index(4));
    for (int j = 0; j < n; ++j) {
      field.kernels.push_back({Vec3(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                                    rng.uniform(-10.0, 10.0)),
                               rng.uniform(0.5, 3.0), rng.uniform(0.1, 2.0)});
    }
    const Vec3 origin(rng.uniform(-15.0, 15.0), rng.uniform(-15.0, 15.0), rng.uniform(-5.0, 5.0));
    const Vec3 dir = normalized(
        Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)));
    const double s0 = rng.uniform(-5.0, 0.0);
    const double s1 = s0 + rng.uniform(1.0, 40.0);

    const double closed = line_integral(field, origin, dir, s0, s1);
    const double quad = oracle::adaptive_simpson(
        [&](double s) { return field.evaluate(origin + dir * s); }, s0, s1, 1e-15);
    CHECK(closed == Catch::Approx(quad).epsilon(1e-10));
  }
}

TEST_CASE("line_integral is additive over abutting segments") {
  CounterRng rng(99);
  KernelField field;
  field.constant = 0.03;
  for (int j = 0; j < 3; ++j)
    field.kernels.push_back({Vec3(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), 0.0),
                             rng.uniform(0.5, 2.0), rng.uniform(0.2, 1.0)});
  const Vec3 origin(-20.0, 1.0, 0.3);
  const Vec3 dir = normalized(Vec3(1.0, -0.05, 0.0));
  for (int trial = 0; trial < 20; ++trial) {
    const double s0 = rng.uniform(0.0, 10.0);
    const double s1 = s0 + rng.uniform(0.5, 15.0);
    const double s2 = s1 + rng.uniform(0.5, 15.0);
    const double left = line_integral(field, origin, dir, s0, s1);
    const double right = line_integral(field, origin, dir, s1, s2);
    const double whole = line_integral(field, origin, dir, s0, s2);
    CHECK(left + right == Catch::Approx(whole).epsilon(1e-12));
  }
}

TEST_CASE("field_gradient matches central finite differences") {
  CounterRng rng(2024);
  DispersionParams p = random_params(rng);
  const PlumeModel model = discretize_release_model(p, p.n_puffs);

  // Probe points on and off the plume.
  const Vec3 probes[] = {model.field.kernels[4].center + Vec3(1.0, 0.5, -0.5),
                         model.field.kernels[10].center + Vec3(-2.0, 1.0, 1.5),
                         model.field.kernels[0].center + Vec3(0.2, 0.2, 0.2)};
  for (const Vec3& x : probes) {
    const ThetaVector grad = field_gradient(p, x);
    const ThetaVector theta = p.theta();
    const double value = evaluate_field(model.field, x);
    for (int c = 0; c < ThetaLayout::kDim; ++c) {
      if (c == ThetaLayout::kScatter) continue;  // field does not depend on c_s
      const double step = 1e-5 * std::max(std::abs(theta[c]), 1.0);
      ThetaVector tp = theta, tm = theta;
      tp[c] += step;
      tm[c] -= step;
      const double fp = evaluate_field(discretize_release(p.with_theta(tp), p.n_puffs), x);
      const double fm = evaluate_field(discretize_release(p.with_theta(tm), p.n_puffs), x);
      const double fd = (fp - fm) / (2.0 * step);
      const double scale = std::max({std::abs(fd), std::abs(value) * 1e-4, 1e-12});
      CHECK(std::abs(grad[c] - fd) / scale < 1e-5);
    }
    // Linearity in the release rate.
    if (p.release_rate > 0.0)
      CHECK(grad[ThetaLayout::kRelease] ==
            Catch::Approx((value - p.ambient_level) / p.release_rate).epsilon(1e-10));
  }

  // Far from the plume every sensitivity dies off.
  const ThetaVector far = field_gradient(p, Vec3(-500.0, -500.0, 200.0));
  for (double g : far) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("line_integral_with_gradient matches finite differences") {
  CounterRng rng(515);
  DispersionParams p = random_params(rng);
  const PlumeModel model = discretize_release_model(p, p.n_puffs);

  const Vec3 origin(0.0, 0.0, 1.5);
  const Vec3 dir = normalized(model.field.kernels[8].center - origin);
  const double s0 = 10.0;
  const double s1 = norm(model.field.kernels[8].center - origin) + 30.0;

  ThetaVector grad{};
  const double value = line_integral_with_gradient(model, origin, dir, s0, s1, grad);
  CHECK(value == Catch::Approx(line_integral(model.field, origin, dir, s0, s1)).epsilon(1e-13));

  const ThetaVector theta = p.theta();
  for (int c = 0; c < ThetaLayout::kDim; ++c) {
    if (c == ThetaLayout::kScatter) continue;
    const double step = 1e-5 * std::max(std::abs(theta[c]), 1.0);
    ThetaVector tp = theta, tm = theta;
    tp[c] += step;
    tm[c] -= step;
    const double fp =
        line_integral(discretize_release(p.with_theta(tp), p.n_puffs), origin, dir, s0, s1);
    const double fm =
        line_integral(discretize_release(p.with_theta(tm), p.n_puffs), origin, dir, s0, s1);
    const double fd = (fp - fm) / (2.0 * step);
    const double scale = std::max({std::abs(fd), std::abs(value) * 1e-4, 1e-12});
    CHECK(std::abs(grad[c] - fd) / scale < 1e-4);
  }
}

TEST_CASE("parameter vector round-trips through theta") {
  DispersionParams p = reference_params();
  const ThetaVector t = p.theta();
  const DispersionParams q = p.with_theta(t);
  CHECK(q.theta() == t);
  CHECK(t.size() == 14);
}
