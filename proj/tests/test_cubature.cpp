#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "qsg/cubature.hpp"

using Catch::Approx;
using qsg::Family;
using qsg::SplineOrder;

namespace {

qsg::LevelSet levels_1d(std::initializer_list<int> ks) {
  qsg::LevelSet s;
  for (int k : ks) s.levels.push_back({k});
  return s;
}

std::map<double, double> as_map(const qsg::CubatureRule& rule) {
  std::map<double, double> m;
  for (std::size_t i = 0; i < rule.size(); ++i) m[rule.points[i].coord(0)] = rule.weights[i];
  return m;
}

std::vector<qsg::LevelSet> sample_sets() {
  std::vector<qsg::LevelSet> sets;
  for (int d = 1; d <= 3; ++d) {
    qsg::SmoothnessSpec h;
    h.d = d;
    h.p = h.q = 2;
    h.theta = 1;
    h.kind = qsg::Hybrid{1.5, -0.5};
    sets.push_back(qsg::delta_hybrid(3.0, h, qsg::TripleClass::A));
    h.kind = qsg::Hybrid{1.0, 0.75};
    h.theta = 3;
    sets.push_back(qsg::delta_hybrid(3.0, h, qsg::TripleClass::B));
    if (d >= 2) {
      qsg::SmoothnessSpec m;
      m.d = d;
      m.kind = qsg::MixedVector{std::vector<double>(static_cast<std::size_t>(d), 1.5)};
      std::get<qsg::MixedVector>(m.kind).a[0] = 1.0;
      sets.push_back(qsg::delta_mixed(3.0, m, qsg::TripleClass::A));
      h.kind = qsg::Hybrid{2.0, 0.0};
      h.gamma = 1.0;
      sets.push_back(qsg::delta_energy(3.0, h, false));
    }
    sets.push_back(qsg::comparison_sets(3.0, 1.0, Family::Smolyak, d));
  }
  return sets;
}

}  // namespace

TEST_CASE("one-dimensional order-2 rules are trapezoid rules", "[cubature]") {
  auto rule = qsg::assemble_weights(levels_1d({0}), SplineOrder(2));
  CHECK(as_map(rule) == std::map<double, double>{{0.0, 0.5}, {1.0, 0.5}});
  rule = qsg::assemble_weights(levels_1d({0, 1}), SplineOrder(2));
  const auto m = as_map(rule);
  REQUIRE(m.size() == 3);
  CHECK(m.at(0.0) == Approx(0.25).margin(1e-15));
  CHECK(m.at(0.5) == Approx(0.5).margin(1e-15));
  CHECK(m.at(1.0) == Approx(0.25).margin(1e-15));
  CHECK(rule.budget == 5);

  auto f = [](std::span<const double> x) { return std::exp(x[0]); };
  const auto rec = qsg::build(f, levels_1d({0, 1}), SplineOrder(2));
  CHECK(qsg::integrate_reconstruction(rec) == Approx(0.25 * 1 + 0.5 * std::exp(0.5) + 0.25 * std::exp(1.0)).margin(1e-14));
}

TEST_CASE("integrals of simple reconstructions", "[cubature]") {
  qsg::LevelSet d2;
  d2.levels = {{0, 0}, {0, 1}, {1, 0}};
  auto xy = [](std::span<const double> x) { return x[0] * x[1]; };
  CHECK(qsg::integrate_reconstruction(qsg::build(xy, d2, SplineOrder(2))) == Approx(0.25).margin(1e-12));
  auto one = [](std::span<const double>) { return 1.0; };
  for (int r = 1; r <= 4; ++r)
    CHECK(qsg::integrate_reconstruction(qsg::build(one, d2, SplineOrder(r))) == Approx(1.0).margin(1e-12));
}

TEST_CASE("rules sum to one and integrate polynomials exactly", "[cubature][property]") {
  for (const auto& set : sample_sets()) {
    for (int r = 1; r <= 4; ++r) {
      const auto rule = qsg::assemble_weights(set, SplineOrder(r));
      INFO("r=" << r << " d=" << set.dim() << " family=" << qsg::to_string(set.family));
      CHECK(rule.weight_sum() == Approx(1.0).margin(1e-10));
      CHECK(qsg::apply_rule(rule, [](std::span<const double>) { return 3.0; }) == Approx(3.0).margin(1e-10));
      // prod_i x_i^{r-1} integrates to r^{-d}.
      auto mono = [r](std::span<const double> x) {
        double v = 1.0;
        for (double xi : x) v *= std::pow(xi, r - 1);
        return v;
      };
      CHECK(qsg::apply_rule(rule, mono) == Approx(std::pow(1.0 / r, set.dim())).margin(1e-10));
    }
  }
}

TEST_CASE("applying the rule equals integrating the reconstruction", "[cubature][property]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const auto& set : sample_sets()) {
    for (int r = 1; r <= 4; ++r) {
      const auto rule = qsg::assemble_weights(set, SplineOrder(r));
      for (int trial = 0; trial < 5; ++trial) {
        const double a = u(rng), b = u(rng), c = u(rng);
        auto f = [&](std::span<const double> x) {
          double v = a;
          for (std::size_t i = 0; i < x.size(); ++i) v += std::sin(b * x[i] + c * i) * std::cos(c * x[i] * x[i]);
          return v;
        };
        const double lhs = qsg::apply_rule(rule, f);
        const double rhs = qsg::integrate_reconstruction(qsg::build(f, set, SplineOrder(r)));
        INFO("r=" << r << " d=" << set.dim());
        CHECK(lhs == Approx(rhs).margin(1e-10));
      }
    }
  }
}

TEST_CASE("weights do not depend on the thread count", "[cubature]") {
  const auto set = sample_sets()[5];
  const auto a = qsg::assemble_weights(set, SplineOrder(4), 1);
  const auto b = qsg::assemble_weights(set, SplineOrder(4), 4);
  CHECK(a.points == b.points);
  CHECK(a.weights == b.weights);
}

TEST_CASE("rule CSV export prints exact coordinates", "[cubature]") {
  const auto rule = qsg::assemble_weights(levels_1d({0, 1, 2}), SplineOrder(2));
  std::ostringstream os;
  qsg::write_rule_csv(os, rule);
  const std::string csv = os.str();
  CHECK(csv.rfind("x_1,weight\n0,", 0) == 0);
  CHECK(csv.find("\n0.25,0.25\n") != std::string::npos);
  CHECK(csv.find("\n0.75,") != std::string::npos);
  CHECK(csv.find("\n1,0.125\n") != std::string::npos);
}
