#pragma once

// Exact oracle for the causal identities behind the cross-domain risk.  A
// tiny structural model over (S, X, Y) with binary S is enumerated to machine
// precision; every identity is checked by computing both sides through
// genuinely different arithmetic routes.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "xerm/common.hpp"

namespace xerm {

inline constexpr double kScmTolerance = 1e-12;
inline constexpr int kScmMaxDomain = 16;

// S -> X and (X, S) -> Y.  S is the domain selector (1 = imbalanced source,
// 0 = balanced source); the S -> Y edge is what makes S a confounder.
struct DiscreteScm {
    int n_x = 0;
    int n_y = 0;
    std::array<double, 2> p_s{};            // P(S = s)
    std::vector<double> p_x_given_s;        // [2][n_x], row-major over s
    std::vector<double> p_y_given_xs;       // [2][n_x][n_y]

    double px(int s, int x) const { return p_x_given_s[static_cast<size_t>(s * n_x + x)]; }
    double py(int s, int x, int y) const {
        return p_y_given_xs[static_cast<size_t>((s * n_x + x) * n_y + y)];
    }
    // P(x, y, s) by the generative factorisation.
    double joint(int x, int y, int s) const { return p_s[static_cast<size_t>(s)] * px(s, x) * py(s, x, y); }
};

// Throws invalid-scm unless every row is a distribution (1e-12 sum tolerance)
// and the domains fit the enumeration budget.
void validate_scm(const DiscreteScm& scm);

// P(y|do(x)) = sum_s P(y|x,s) P(s), read straight off the model fields
// (the mutilated graph drops S -> X, leaving P(s) as S's marginal).
std::vector<double> interventional(const DiscreteScm& scm, int x);

// The same quantity recovered from the observational joint table alone:
// sum_s P(x,y,s) / P(x|s), with P(x|s) itself re-derived from the joint.
// Throws zero-support if any P(x|s) vanishes.
std::vector<double> backdoor_adjust(const DiscreteScm& scm, int x);

// Observational P(y|x) = sum_s P(y|x,s) P(s|x); differs from the
// interventional distribution exactly when S confounds X and Y.
std::vector<double> observational(const DiscreteScm& scm, int x);

struct NamedValue {
    std::string name;
    double value = 0.0;
};

// Evaluates each line of the backdoor derivation for one (x, y) cell:
//   definition            P(y|do(x)) from the mutilated-graph joint
//   do-conditional        sum_s P(y|do(x),s) P(s|do(x)), both factors from
//                         that mutilated joint
//   delete-do             sum_s P(y|x,s) P(s), model fields directly
//   joint-over-p_xs       sum_s [P(x,y,s)/P(x,s)] P(s), observational joint
//   joint-over-p_x_given_s  sum_s P(x,y,s)/P(x|s), observational joint
// Successive lines must agree within kScmTolerance or identity-violated is
// thrown.  `skip_do_removal` replaces P(s|do(x)) with the observational
// P(s|x) in the second line, the negative control showing that step carries
// the proof.
std::vector<NamedValue> verify_a1_chain(const DiscreteScm& scm, int x, int y,
                                        bool skip_do_removal = false);

struct RiskPair {
    double lhs = 0.0;  // interventional risk: sum_xy L(y, f(x)) P(y|do(x)) P(x)
    double rhs = 0.0;  // reweighted source risk: sum_xys L(y, f(x)) [P(x)/P(x|s)] P(x,y,s)
};

// `loss` is row-major [n_y][n_y] indexed (true, predicted); `classifier`
// maps each x to a predicted y.  Asserts |lhs - rhs| < kScmTolerance
// (identity-violated otherwise) and returns both sides.
RiskPair risk_decomposition(const DiscreteScm& scm, const std::vector<double>& loss,
                            const std::vector<int>& classifier);

// sum_xy L(y, f(x)) P(x, y): the naive risk on the confounded source
// distribution, for negative controls.
double observational_risk(const DiscreteScm& scm, const std::vector<double>& loss,
                          const std::vector<int>& classifier);

struct PropensityPair {
    double lhs = 0.0;  // P(x) / P(x|s)
    double rhs = 0.0;  // P(s) / P(s|x)
};

// Both ratios derived from the joint through different marginalisation
// orders; asserts agreement within kScmTolerance.
PropensityPair propensity_identity(const DiscreteScm& scm, int x, int s);

struct ScmGenOptions {
    bool uniform_s = false;   // pin P(S) = (0.5, 0.5)
    double fixed_p_s1 = -1;   // if in (0,1), pin P(S=1) to this value
};

// Full-support random model: each conditional row is drawn from a flat
// simplex and redrawn until every entry is at least 1e-3.
DiscreteScm random_scm(Rng& rng, int n_x, int n_y, const ScmGenOptions& opts = {});

// Largest |observational(x) - interventional(x)| over all cells; a model
// counts as confounded when this is materially nonzero.
double confounding_gap(const DiscreteScm& scm);

// One batch of randomized identity checks, shared by the CLI table and the
// acceptance harness.  Worst-case absolute deviations are tracked per
// identity; the negative controls replace the interventional quantity with
// its observational counterpart and count how often the equality breaks on
// confounded models (it should, nearly always).
struct CausalCheckSummary {
    int trials = 0;
    double worst_backdoor_dev = 0.0;      // backdoor route vs interventional
    double worst_a1_final_dev = 0.0;      // last derivation line vs interventional
    double worst_risk_dev = 0.0;          // |lhs - rhs| of the risk decomposition
    double worst_propensity_dev = 0.0;    // |P(x)/P(x|s) - P(s)/P(s|x)|
    double worst_uniform_const_dev = 0.0; // uniform P(S): |P(x)/P(x|s) - 0.5/P(s|x)|
    int confounded = 0;                   // trials with confounding gap > 1e-6
    int risk_control_broken = 0;          // confounded trials caught by the risk control
    int a1_control_broken = 0;            // confounded trials caught by the chain control
};

CausalCheckSummary run_causal_checks(uint64_t seed, int trials, int max_x, int max_y,
                                     const ScmGenOptions& opts = {});

}  // namespace xerm
