#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "metabayes/error.hpp"

using namespace metabayes;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

// log|L1| for the unit compound-symmetric covariance (1 on the diagonal, 0.5 off it).
double unit_log_det_cholesky(std::size_t n) {
  return 0.5 * (static_cast<double>(n - 1) * std::log(0.5) + std::log((static_cast<double>(n) + 1.0) / 2.0));
}

}  // namespace

TEST_SUITE("posterior") {
  TEST_CASE("likelihood kernels by hand") {
    const std::vector<double> eta{0.0, 0.0};
    Dataset bin(Endpoint::binary, {{1, 0, {}, BinaryOutcome{1, 2}}, {1, 1, {}, BinaryOutcome{0, 1}}});
    // Second arm: y=0, n=1 at eta 0 contributes -log 2.
    CHECK(log_likelihood(bin, eta) == doctest::Approx(-2 * std::log(2.0) - std::log(2.0)).epsilon(1e-14));

    Dataset cont(Endpoint::continuous, {{1, 0, {}, ContinuousOutcome{0, 1}}, {1, 1, {}, ContinuousOutcome{0, 1}}});
    CHECK(log_likelihood(cont, eta) == doctest::Approx(-kLog2Pi).epsilon(1e-14));

    Dataset cnt(Endpoint::count, {{1, 0, {}, CountOutcome{0, 1.0}}, {1, 1, {}, CountOutcome{0, 1.0}}});
    CHECK(log_likelihood(cnt, eta) == doctest::Approx(-2.0));
  }

  TEST_CASE("log prior at the origin by hand") {
    Posterior post(fixtures::topiramate_spec(), fixtures::binary_pairwise());
    std::vector<double> z = zeros(post.dimension());
    const auto* tau = post.layout().find("log_tau");
    REQUIRE(tau != nullptr);
    z[tau->offset] = std::log(0.5);

    auto normal_at_mean = [](double sd) { return -std::log(sd) - 0.5 * kLog2Pi; };
    const double phi1 = std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);
    const double half_normal = std::log(2.0 * phi1 / 0.5) + std::log(0.5);
    const double expected = 6 * normal_at_mean(10.0) + normal_at_mean(2.5) + half_normal - 6.0 / 2.0 * kLog2Pi;
    CHECK(post.log_prior(z) == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("layout of a common-effect model") {
    ModelSpec spec = fixtures::topiramate_spec();
    spec.random_effects = false;
    Posterior post(spec, fixtures::binary_pairwise());
    CHECK(post.dimension() == 7);
    CHECK(post.layout().find("log_tau") == nullptr);
    CHECK(post.layout().find("u") == nullptr);
    CHECK(post.evaluate(zeros(7)).gradient.size() == 7);
  }

  TEST_CASE("constrain and unconstrain are inverse") {
    ModelSpec spec;
    spec.family = ModelFamily::mbma;
    spec.dose_response = DoseResponseKind::sigmoidal;
    spec.priors.tau = PriorSpec::uniform(0, 3);
    Posterior post(spec, fixtures::binary_doses());
    std::mt19937_64 rng(11);
    for (int i = 0; i < 10; ++i) {
      auto z = fixtures::random_point(post.dimension(), rng);
      auto x = post.layout().constrain(z);
      auto x2 = post.layout().constrain(post.layout().unconstrain(x));
      for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(x2[k] - x[k]) <= 1e-12 * std::max(1.0, std::abs(x[k])));
    }
  }

  TEST_CASE("topiramate gradient matches finite differences") {
    Posterior post(fixtures::topiramate_spec(), fixtures::binary_pairwise());
    std::mt19937_64 rng(2021);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) worst = std::max(worst, fixtures::gradient_error(post, fixtures::random_point(post.dimension(), rng)));
    CHECK(worst < 1e-5);
  }

  TEST_CASE("symmetric and baseline-contrast agree after the affine shift") {
    ModelSpec bc_spec = fixtures::topiramate_spec();
    bc_spec.parametrization = Parametrization::baseline_contrast;
    Posterior sym(fixtures::topiramate_spec(), fixtures::binary_pairwise());
    Posterior bc(bc_spec, fixtures::binary_pairwise());
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
      auto z_bc = fixtures::random_point(bc.dimension(), rng);
      auto gamma = bc.arm_random_effects(z_bc);
      const double d = z_bc[bc.layout().find("theta")->offset];
      auto z_sym = z_bc;
      for (std::size_t s = 0; s < 6; ++s) z_sym[s] = z_bc[s] + 0.5 * (d + gamma[2 * s + 1]);
      CHECK(sym.log_likelihood(z_sym) == doctest::Approx(bc.log_likelihood(z_bc)).epsilon(1e-12));
    }
  }

  TEST_CASE("centered and non-centered differ by the change of variables") {
    struct Case {
      ModelSpec spec;
      Dataset data;
    };
    std::vector<Case> cases;
    cases.push_back({fixtures::topiramate_spec(), fixtures::binary_pairwise()});
    ModelSpec mbma;
    mbma.family = ModelFamily::mbma;
    mbma.dose_response = DoseResponseKind::emax;
    cases.push_back({mbma, fixtures::binary_doses()});
    mbma.endpoint = Endpoint::continuous;
    cases.push_back({mbma, fixtures::continuous_doses()});

    std::mt19937_64 rng(17);
    for (const Case& c : cases) {
      ModelSpec centered = c.spec;
      centered.non_centered = false;
      Posterior pn(c.spec, c.data);
      Posterior pc(centered, c.data);
      const ParameterBlock& u = *pn.layout().find("u");
      const ParameterBlock& g = *pc.layout().find("gamma");
      const ParameterBlock& lt = *pn.layout().find("log_tau");
      REQUIRE(u.offset == g.offset);

      double jacobian_const = 0.0;
      for (std::size_t s = 0; s < c.data.n_studies(); ++s) {
        const std::size_t m = c.spec.family == ModelFamily::mbma ? c.data.study_arms(s).size() - 1 : 1;
        jacobian_const += unit_log_det_cholesky(m);
      }

      for (int i = 0; i < 10; ++i) {
        auto zn = fixtures::random_point(pn.dimension(), rng);
        auto zc = zn;
        std::size_t k = g.offset;
        if (c.spec.family == ModelFamily::mbma) {
          auto gamma = pn.arm_random_effects(zn);
          for (std::size_t a = 0; a < c.data.n_arms(); ++a) {
            if (c.data.arms()[a].arm != 0) zc[k++] = gamma[a];
          }
        } else {
          for (; k < g.offset + g.length; ++k) zc[k] = std::exp(zn[lt.offset]) * zn[k];
        }
        REQUIRE(k == g.offset + g.length);
        const double m_log_tau = static_cast<double>(u.length) * zn[lt.offset];
        CHECK(pc.log_density(zc) == doctest::Approx(pn.log_density(zn) - m_log_tau - jacobian_const).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("arm order within a study does not matter") {
    Dataset d = fixtures::binary_doses();
    std::vector<ArmRecord> arms(d.arms().begin(), d.arms().end());
    std::reverse(arms.begin(), arms.end());
    Dataset shuffled(Endpoint::binary, arms, d.study_labels());
    ModelSpec spec;
    spec.family = ModelFamily::mbma;
    spec.dose_response = DoseResponseKind::emax;
    Posterior a(spec, d), b(spec, shuffled);
    std::mt19937_64 rng(23);
    auto z = fixtures::random_point(a.dimension(), rng);
    CHECK(a.log_density(z) == b.log_density(z));
  }

  TEST_CASE("zero random effects reproduce the common-effect likelihood") {
    ModelSpec ce = fixtures::topiramate_spec();
    ce.random_effects = false;
    Posterior re(fixtures::topiramate_spec(), fixtures::binary_pairwise());
    Posterior fe(ce, fixtures::binary_pairwise());
    std::mt19937_64 rng(29);
    auto z_fe = fixtures::random_point(fe.dimension(), rng);
    auto z_re = z_fe;
    z_re.push_back(0.3);  // log_tau
    z_re.resize(re.dimension(), 0.0);
    CHECK(re.log_likelihood(z_re) == fe.log_likelihood(z_fe));
  }

  TEST_CASE("uniform tau prior keeps the space unconstrained") {
    ModelSpec spec = fixtures::topiramate_spec();
    spec.priors.tau = PriorSpec::uniform(0, 2);
    Posterior post(spec, fixtures::binary_pairwise());
    REQUIRE(post.layout().find("logit_tau") != nullptr);
    std::vector<double> z(post.dimension(), 0.0);
    z[post.layout().find("logit_tau")->offset] = 30.0;
    CHECK(std::isfinite(post.log_density(z)));
    CHECK(post.layout().constrain(z)[post.layout().find("logit_tau")->offset] <= 2.0);
  }

  TEST_CASE("non-finite evaluation raises with a block name") {
    Posterior post(fixtures::topiramate_spec(), fixtures::binary_pairwise());
    std::vector<double> z(post.dimension(), 0.0);
    z[post.layout().find("log_tau")->offset] = std::numeric_limits<double>::infinity();
    try {
      post.log_posterior_and_gradient(z);
      FAIL("expected DomainError");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("log_tau") != std::string::npos);
    }
    CHECK_NOTHROW(post.log_posterior_and_gradient(std::vector<double>(post.dimension(), 0.1)));
  }
}
