#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "qsg/grids.hpp"

using qsg::Family;
using qsg::Level;
using qsg::TripleClass;

namespace {

qsg::SmoothnessSpec hybrid_spec(double alpha, double beta, int d, double p = 2, double theta = 1, double q = 2) {
  qsg::SmoothnessSpec s;
  s.p = p;
  s.theta = theta;
  s.q = q;
  s.d = d;
  s.r = 4;
  s.kind = qsg::Hybrid{alpha, beta};
  return s;
}

qsg::SmoothnessSpec mixed_spec(std::vector<double> a, double p = 2, double theta = 1, double q = 2) {
  qsg::SmoothnessSpec s;
  s.p = p;
  s.theta = theta;
  s.q = q;
  s.d = static_cast<int>(a.size());
  s.r = 4;
  s.kind = qsg::MixedVector{std::move(a)};
  return s;
}

std::vector<Level> brute(const qsg::LevelFunctional& phi, double xi, int d, int bound = 30) {
  return qsg::oracle::brute_force_levels(d, bound, [&](std::span<const int> k) { return phi(k); }, xi);
}

}  // namespace

TEST_CASE("triple classification", "[grids]") {
  const double inf = qsg::kInf;
  CHECK(qsg::classify_triple(2, 1, 2) == TripleClass::A);
  CHECK(qsg::classify_triple(2, 2, 2) == TripleClass::B);
  CHECK(qsg::classify_triple(1, inf, 2) == TripleClass::B);
  CHECK(qsg::classify_triple(1, 2, 2) == TripleClass::A);
  CHECK(qsg::classify_triple(1, 1, inf) == TripleClass::A);
  CHECK(qsg::classify_triple(1, 2, inf) == TripleClass::B);
  CHECK(qsg::classify_triple(inf, 0.5, 4) == TripleClass::A);
  CHECK(qsg::classify_triple(inf, 1, 0.5) == TripleClass::B);
  CHECK_THROWS_AS(qsg::classify_triple(0, 1, 1), qsg::SpecError);
}

TEST_CASE("hybrid level set example", "[grids]") {
  // |k|_1 - |k|_inf / 2 <= 2; the spec triple is only used for its gap, which is 0 here.
  const auto spec = hybrid_spec(1, -0.5, 2);
  const auto set = qsg::delta_hybrid(2, spec, TripleClass::A);
  const std::vector<Level> expected{{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 0}, {1, 1},
                                    {1, 2}, {2, 0}, {2, 1}, {3, 0}, {4, 0}};
  CHECK(set.levels == expected);
  CHECK(set.levels == brute(set.functional, 2, 2));
  CHECK(qsg::delta_hybrid(0, spec, TripleClass::A).levels == std::vector<Level>{{0, 0}});
}

TEST_CASE("hybrid level set in one dimension", "[grids]") {
  const auto spec = hybrid_spec(1.5, -0.5, 1);
  const auto set = qsg::delta_hybrid(3.5, spec, TripleClass::A);
  CHECK(set.size() == 4);  // k <= 3.5 / 1
}

TEST_CASE("mixed level set example", "[grids]") {
  const auto spec = mixed_spec({1, 1.5});
  const auto set = qsg::delta_mixed(3, spec, TripleClass::A);
  const std::vector<Level> expected{{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {2, 0}, {3, 0}};
  CHECK(set.levels == expected);
  CHECK(qsg::delta_mixed(0, spec, TripleClass::A).size() == 1);
}

TEST_CASE("energy level set example", "[grids]") {
  auto spec = hybrid_spec(2, 0, 2);
  spec.gamma = 1.0;
  const auto set = qsg::delta_energy(2, spec, false);
  // 2|k|_1 - |k|_inf <= 2 excludes (1, 1), where the value is 3.
  const std::vector<Level> expected{{0, 0}, {0, 1}, {0, 2}, {1, 0}, {2, 0}};
  CHECK(set.levels == expected);
  CHECK(set.levels == brute(set.functional, 2, 2));
}

TEST_CASE("comparison sets", "[grids]") {
  CHECK(qsg::comparison_sets(4, 2, Family::FullGrid, 2).size() == 9);
  CHECK(qsg::comparison_sets(4, 2, Family::Smolyak, 2).size() == 6);
  CHECK_THROWS_AS(qsg::comparison_sets(4, 0, Family::Smolyak, 2), qsg::SpecError);
}

TEST_CASE("sample grid budgets", "[grids]") {
  qsg::LevelSet a;
  a.levels = {{0, 0}};
  auto g = qsg::sample_grid(a);
  CHECK(g.budget == 4);
  CHECK(g.distinct_point_list().size() == 4);

  qsg::LevelSet b;
  b.levels = {{0}, {1}};
  g = qsg::sample_grid(b);
  CHECK(g.budget == 5);
  CHECK(g.distinct == 3);
  CHECK(g.distinct_point_list().size() == 3);

  qsg::LevelSet c;
  c.levels = {{0, 0}, {1, 0}};
  CHECK(qsg::sample_grid(c).budget == 10);
}

TEST_CASE("distinct point count matches explicit deduplication", "[grids][property]") {
  for (int d = 1; d <= 3; ++d) {
    for (double xi : {0.0, 1.0, 2.5, 4.0, 5.5}) {
      const auto set = qsg::delta_hybrid(xi, hybrid_spec(1, 0.5, d), TripleClass::A);
      const auto g = qsg::sample_grid(set);
      std::int64_t pairs = 0;
      g.for_each_pair([&](const Level& k, const std::vector<int>& s) {
        ++pairs;
        for (std::size_t i = 0; i < k.size(); ++i) REQUIRE((s[i] >= 0 && s[i] <= (1 << k[i])));
      });
      CHECK(pairs == g.budget);
      CHECK(static_cast<std::int64_t>(g.distinct_point_list().size()) == g.distinct);
    }
  }
}

TEST_CASE("enumeration equals brute force and is downward closed", "[grids][property]") {
  std::vector<qsg::LevelFunctional> phis;
  for (int d = 2; d <= 3; ++d) {
    for (auto cls : {TripleClass::A, TripleClass::B}) {
      phis.push_back(qsg::hybrid_functional(hybrid_spec(1.5, 0.75, d, 2, cls == TripleClass::A ? 1 : 3), cls));
      phis.push_back(qsg::hybrid_functional(hybrid_spec(2, -0.75, d, 4, cls == TripleClass::A ? 1 : 3, 2), cls));
    }
    std::vector<double> a{1.0};
    for (int i = 1; i < d; ++i) a.push_back(1.5 + 0.25 * (i - 1));
    phis.push_back(qsg::mixed_functional(mixed_spec(a), TripleClass::A));
    phis.push_back(qsg::mixed_functional(mixed_spec(a, 2, 3), TripleClass::B));
    phis.push_back(qsg::comparison_functional(1.25, Family::Smolyak, d));
    phis.push_back(qsg::comparison_functional(1.25, Family::FullGrid, d));
  }
  for (const auto& phi : phis) {
    INFO("l1=" << phi.l1 << " linf=" << phi.linf << " w0=" << phi.w[0] << " d=" << phi.dim());
    const int d = static_cast<int>(phi.dim());
    std::int64_t last = 0;
    for (double xi = 0; xi <= 7.0; xi += 0.5) {
      const auto set = qsg::make_level_set(Family::DeltaHybrid, phi, xi);
      CHECK(set.levels == brute(phi, xi, d, 12));
      CHECK(set.is_downward_closed());
      CHECK(set.contains(Level(static_cast<std::size_t>(d), 0)));
      const auto n = qsg::budget(set);
      CHECK(n >= last);
      last = n;
    }
  }
}

TEST_CASE("class-B sets contain class-A sets", "[grids][property]") {
  for (int d = 2; d <= 3; ++d) {
    for (double beta : {0.75, -0.5}) {
      const auto spec = hybrid_spec(1.5, beta, d, 2, 3, 2);
      for (double xi : {2.0, 4.0, 6.0}) {
        const auto a = qsg::delta_hybrid(xi, spec, TripleClass::A);
        const auto b = qsg::delta_hybrid(xi, spec, TripleClass::B);
        for (const auto& k : a.levels) CHECK(b.contains(k));
      }
    }
    std::vector<double> av{1.0};
    for (int i = 1; i < d; ++i) av.push_back(1.5);
    const auto mspec = mixed_spec(av, 2, 3);
    const auto a = qsg::delta_mixed(5, mspec, TripleClass::A);
    const auto b = qsg::delta_mixed(5, mspec, TripleClass::B);
    for (const auto& k : a.levels) CHECK(b.contains(k));
  }
}

TEST_CASE("epsilon interval is enforced", "[grids]") {
  auto spec = hybrid_spec(1.5, 0.75, 2, 2, 3, 2);
  spec.epsilon = 0.75;
  CHECK_THROWS_WITH(qsg::delta_hybrid(3, spec, TripleClass::B), Catch::Matchers::StartsWith("epsilon violates class-B constraint"));
  spec.epsilon = 0.5;
  CHECK_NOTHROW(qsg::delta_hybrid(3, spec, TripleClass::B));
  auto mspec = mixed_spec({1.0, 1.5}, 2, 3);
  mspec.epsilon = 0.5;
  CHECK_THROWS_AS(qsg::delta_mixed(3, mspec, TripleClass::B), qsg::SpecError);
  // Default is the midpoint of the legal interval.
  spec.epsilon.reset();
  CHECK(qsg::resolve_epsilon(spec, Family::DeltaHybrid) == Catch::Approx(0.375));
}

TEST_CASE("spec validation", "[grids]") {
  CHECK_NOTHROW(hybrid_spec(1, 0.5, 2).validate(Family::DeltaHybrid));
  CHECK_THROWS_WITH(hybrid_spec(1, -0.5, 2).validate(Family::DeltaHybrid),
                    "hybrid smoothness requires 1/p < min(alpha, alpha + beta)");
  CHECK_THROWS_AS(hybrid_spec(1, 0, 2).validate(Family::DeltaHybrid), qsg::SpecError);
  CHECK_THROWS_AS(hybrid_spec(3.5, 1, 2).validate(Family::DeltaHybrid), qsg::SpecError);
  CHECK_THROWS_AS(mixed_spec({1.5, 1.0}).validate(Family::DeltaMixed), qsg::SpecError);
  CHECK_THROWS_AS(mixed_spec({0.4, 1.0}).validate(Family::DeltaMixed), qsg::SpecError);
  auto e = hybrid_spec(2, 0, 2);
  CHECK_THROWS_WITH(e.validate(Family::DeltaEnergy), "energy family requires gamma");
  e.gamma = 1.0;
  CHECK_NOTHROW(e.validate(Family::DeltaEnergy));
  e.gamma = 2.5;
  CHECK_THROWS_AS(e.validate(Family::DeltaEnergy), qsg::SpecError);
}

TEST_CASE("xi for budget matches an exhaustive breakpoint scan", "[grids]") {
  const auto spec = hybrid_spec(1, -0.5, 2);
  const auto phi = qsg::hybrid_functional(spec, TripleClass::A);
  // Oracle: every value phi takes on a bounded box is a candidate breakpoint.
  std::set<double> candidates;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) candidates.insert(phi(std::vector<int>{i, j}));
  for (std::int64_t n : {4LL, 9LL, 100LL, 1000LL}) {
    double best = -1;
    for (double xi : candidates)
      if (qsg::oracle::budget_of(brute(phi, xi, 2, 20)) <= n) best = std::max(best, xi);
    const auto fit = qsg::xi_for_budget(n, Family::DeltaHybrid, phi);
    INFO("n=" << n);
    CHECK(fit.xi == Catch::Approx(best).margin(1e-12));
    CHECK(fit.set.levels == brute(phi, best, 2, 20));
    CHECK(qsg::budget(fit.set) <= n);
  }
  CHECK_THROWS_WITH(qsg::xi_for_budget(3, Family::DeltaHybrid, phi), "budget below minimal grid");
}

TEST_CASE("xi for budget is idempotent and monotone", "[grids][property]") {
  const auto phi = qsg::hybrid_functional(hybrid_spec(1.5, 0.75, 3), TripleClass::A);
  // Breakpoints: values of phi at (1,0,0), (1,1,0), (2,0,0), (1,1,1).
  for (double xi : {2.25, 3.75, 4.5, 5.25}) {
    const auto set = qsg::make_level_set(Family::DeltaHybrid, phi, xi);
    const auto n = qsg::budget(set);
    const auto same = qsg::xi_for_budget(n, Family::DeltaHybrid, phi);
    CHECK(same.xi >= xi - 1e-12);
    CHECK(same.set.levels == set.levels);
    const auto less = qsg::xi_for_budget(n - 1, Family::DeltaHybrid, phi);
    CHECK(less.set.size() < set.size());
    for (const auto& k : less.set.levels) CHECK(set.contains(k));
  }
}

TEST_CASE("budget grows like 2^(xi/nu)", "[grids][property]") {
  for (int d = 2; d <= 3; ++d) {
    std::vector<qsg::SmoothnessSpec> specs{hybrid_spec(1.5, 0.75, d), hybrid_spec(2, -0.75, d, 4, 1, 2)};
    std::vector<double> a{1.0};
    for (int i = 1; i < d; ++i) a.push_back(1.5);
    specs.push_back(mixed_spec(a));
    for (const auto& spec : specs) {
      const Family fam = spec.is_hybrid() ? Family::DeltaHybrid : Family::DeltaMixed;
      const auto phi = qsg::functional_for(fam, spec);
      const double nu = qsg::cardinality_nu(spec, fam);
      double lo = qsg::kInf, hi = 0;
      for (double xi = 5; xi <= 25; xi += 0.5) {
        const double ratio = static_cast<double>(qsg::budget(qsg::make_level_set(fam, phi, xi))) / std::exp2(xi / nu);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
      INFO("d=" << d << " nu=" << nu << " lo=" << lo << " hi=" << hi);
      CHECK(hi / lo < 16.0);
    }
  }
}

TEST_CASE("level set text round trip", "[grids]") {
  const auto set = qsg::delta_hybrid(2, hybrid_spec(1, -0.5, 2), TripleClass::A);
  std::stringstream ss;
  qsg::write_levels(ss, set);
  CHECK(ss.str().substr(0, 8) == "0 0\n0 1\n");
  CHECK(qsg::read_levels(ss) == set.levels);
  std::stringstream bad("0 0\n1 x\n");
  CHECK_THROWS_WITH(qsg::read_levels(bad), "line 2: invalid level entry 'x'");
}
