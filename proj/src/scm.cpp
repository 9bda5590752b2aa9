#include "xerm/scm.hpp"

#include <cmath>

namespace xerm {

namespace {

void check_row(const double* row, size_t n, const char* what) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!(row[i] >= 0.0)) {
            throw Error("invalid-scm", std::string(what) + " has a negative or NaN entry");
        }
        sum += row[i];
    }
    if (std::abs(sum - 1.0) > kScmTolerance) {
        throw Error("invalid-scm",
                    std::string(what) + " sums to " + format_double(sum) + ", not 1");
    }
}

void check_x(const DiscreteScm& scm, int x) {
    if (x < 0 || x >= scm.n_x) {
        throw Error("id-out-of-range", "x = " + std::to_string(x));
    }
}

// P(x|s) recomputed by marginalising the joint over y, then dividing out
// P(s).  Shares no intermediate with DiscreteScm::px.
double px_given_s_from_joint(const DiscreteScm& scm, int s, int x) {
    double pxs = 0.0;
    for (int y = 0; y < scm.n_y; ++y) {
        pxs += scm.joint(x, y, s);
    }
    double ps = 0.0;
    for (int xx = 0; xx < scm.n_x; ++xx) {
        for (int y = 0; y < scm.n_y; ++y) {
            ps += scm.joint(xx, y, s);
        }
    }
    return pxs / ps;
}

void require_support(const DiscreteScm& scm, int x) {
    for (int s = 0; s < 2; ++s) {
        if (scm.px(s, x) <= 0.0) {
            throw Error("zero-support",
                        "P(x=" + std::to_string(x) + "|s=" + std::to_string(s) + ") = 0");
        }
    }
}

}  // namespace

void validate_scm(const DiscreteScm& scm) {
    if (scm.n_x < 2 || scm.n_y < 2 || scm.n_x > kScmMaxDomain || scm.n_y > kScmMaxDomain) {
        throw Error("invalid-scm", "domain sizes must lie in [2, 16]");
    }
    if (scm.p_x_given_s.size() != static_cast<size_t>(2 * scm.n_x) ||
        scm.p_y_given_xs.size() != static_cast<size_t>(2 * scm.n_x * scm.n_y)) {
        throw Error("invalid-scm", "table shapes do not match domains");
    }
    check_row(scm.p_s.data(), 2, "P(S)");
    for (int s = 0; s < 2; ++s) {
        check_row(&scm.p_x_given_s[static_cast<size_t>(s * scm.n_x)],
                  static_cast<size_t>(scm.n_x), "P(X|S)");
        for (int x = 0; x < scm.n_x; ++x) {
            check_row(&scm.p_y_given_xs[static_cast<size_t>((s * scm.n_x + x) * scm.n_y)],
                      static_cast<size_t>(scm.n_y), "P(Y|X,S)");
        }
    }
}

std::vector<double> interventional(const DiscreteScm& scm, int x) {
    validate_scm(scm);
    check_x(scm, x);
    std::vector<double> out(static_cast<size_t>(scm.n_y), 0.0);
    for (int y = 0; y < scm.n_y; ++y) {
        for (int s = 0; s < 2; ++s) {
            out[static_cast<size_t>(y)] += scm.py(s, x, y) * scm.p_s[static_cast<size_t>(s)];
        }
    }
    return out;
}

std::vector<double> backdoor_adjust(const DiscreteScm& scm, int x) {
    validate_scm(scm);
    check_x(scm, x);
    require_support(scm, x);
    std::vector<double> out(static_cast<size_t>(scm.n_y), 0.0);
    for (int s = 0; s < 2; ++s) {
        const double pxs = px_given_s_from_joint(scm, s, x);
        for (int y = 0; y < scm.n_y; ++y) {
            out[static_cast<size_t>(y)] += scm.joint(x, y, s) / pxs;
        }
    }
    return out;
}

std::vector<double> observational(const DiscreteScm& scm, int x) {
    validate_scm(scm);
    check_x(scm, x);
    require_support(scm, x);
    // P(s|x) = P(x, s) / P(x), everything from the joint.
    double px = 0.0;
    std::array<double, 2> pxs{};
    for (int s = 0; s < 2; ++s) {
        for (int y = 0; y < scm.n_y; ++y) {
            pxs[static_cast<size_t>(s)] += scm.joint(x, y, s);
        }
        px += pxs[static_cast<size_t>(s)];
    }
    std::vector<double> out(static_cast<size_t>(scm.n_y), 0.0);
    for (int y = 0; y < scm.n_y; ++y) {
        for (int s = 0; s < 2; ++s) {
            out[static_cast<size_t>(y)] += scm.py(s, x, y) * (pxs[static_cast<size_t>(s)] / px);
        }
    }
    return out;
}

std::vector<NamedValue> verify_a1_chain(const DiscreteScm& scm, int x, int y,
                                        bool skip_do_removal) {
    validate_scm(scm);
    check_x(scm, x);
    if (y < 0 || y >= scm.n_y) {
        throw Error("id-out-of-range", "y = " + std::to_string(y));
    }
    require_support(scm, x);

    // Mutilated-graph joint over (y, s) with X clamped to x: S keeps its
    // prior because its incoming edge set is empty and S -> X is severed.
    std::vector<double> mut(static_cast<size_t>(scm.n_y * 2), 0.0);
    for (int s = 0; s < 2; ++s) {
        for (int yy = 0; yy < scm.n_y; ++yy) {
            mut[static_cast<size_t>(yy * 2 + s)] = scm.p_s[static_cast<size_t>(s)] * scm.py(s, x, yy);
        }
    }

    const double definition = mut[static_cast<size_t>(y * 2 + 0)] + mut[static_cast<size_t>(y * 2 + 1)];

    // Line 2: sum_s P(y|do(x), s) P(s|do(x)).  Both factors re-derived from
    // the mutilated joint; with skip_do_removal the second factor is the
    // observational P(s|x) instead, which is only valid without confounding.
    double do_conditional = 0.0;
    for (int s = 0; s < 2; ++s) {
        double mut_s = 0.0;
        for (int yy = 0; yy < scm.n_y; ++yy) {
            mut_s += mut[static_cast<size_t>(yy * 2 + s)];
        }
        const double py_given_do_s = mut[static_cast<size_t>(y * 2 + s)] / mut_s;
        double weight;
        if (skip_do_removal) {
            double pxs = 0.0, px = 0.0;
            for (int ss = 0; ss < 2; ++ss) {
                for (int yy = 0; yy < scm.n_y; ++yy) {
                    const double j = scm.joint(x, yy, ss);
                    px += j;
                    if (ss == s) {
                        pxs += j;
                    }
                }
            }
            weight = pxs / px;
        } else {
            weight = mut_s;
        }
        do_conditional += py_given_do_s * weight;
    }

    // Line 3: sum_s P(y|x,s) P(s), model fields directly.
    double delete_do = 0.0;
    for (int s = 0; s < 2; ++s) {
        delete_do += scm.py(s, x, y) * scm.p_s[static_cast<size_t>(s)];
    }

    // Line 4: sum_s [P(x,y,s)/P(x,s)] P(s), observational joint.
    double over_pxs = 0.0;
    for (int s = 0; s < 2; ++s) {
        double pxs = 0.0;
        for (int yy = 0; yy < scm.n_y; ++yy) {
            pxs += scm.joint(x, yy, s);
        }
        over_pxs += scm.joint(x, y, s) / pxs * scm.p_s[static_cast<size_t>(s)];
    }

    // Line 5: sum_s P(x,y,s)/P(x|s), with P(x|s) from the joint.
    double over_px_given_s = 0.0;
    for (int s = 0; s < 2; ++s) {
        over_px_given_s += scm.joint(x, y, s) / px_given_s_from_joint(scm, s, x);
    }

    std::vector<NamedValue> chain{
        {"definition", definition},
        {"do-conditional", do_conditional},
        {"delete-do", delete_do},
        {"joint-over-p_xs", over_pxs},
        {"joint-over-p_x_given_s", over_px_given_s},
    };
    for (size_t i = 1; i < chain.size(); ++i) {
        if (std::abs(chain[i].value - chain[i - 1].value) > kScmTolerance) {
            throw Error("identity-violated",
                        chain[i - 1].name + " vs " + chain[i].name + ": " +
                            format_double(chain[i - 1].value) + " != " +
                            format_double(chain[i].value));
        }
    }
    return chain;
}

namespace {

double loss_at(const DiscreteScm& scm, const std::vector<double>& loss, int y_true, int y_pred) {
    return loss[static_cast<size_t>(y_true * scm.n_y + y_pred)];
}

void check_risk_inputs(const DiscreteScm& scm, const std::vector<double>& loss,
                       const std::vector<int>& classifier) {
    if (loss.size() != static_cast<size_t>(scm.n_y * scm.n_y)) {
        throw Error("shape-mismatch", "loss table must be |Y| x |Y|");
    }
    if (classifier.size() != static_cast<size_t>(scm.n_x)) {
        throw Error("shape-mismatch", "classifier must cover every x");
    }
    for (int pred : classifier) {
        if (pred < 0 || pred >= scm.n_y) {
            throw Error("id-out-of-range", "classifier output " + std::to_string(pred));
        }
    }
}

}  // namespace

RiskPair risk_decomposition(const DiscreteScm& scm, const std::vector<double>& loss,
                            const std::vector<int>& classifier) {
    validate_scm(scm);
    check_risk_inputs(scm, loss, classifier);
    for (int x = 0; x < scm.n_x; ++x) {
        require_support(scm, x);
    }

    RiskPair out;
    for (int x = 0; x < scm.n_x; ++x) {
        double px = 0.0;
        for (int s = 0; s < 2; ++s) {
            px += scm.p_s[static_cast<size_t>(s)] * scm.px(s, x);
        }
        const std::vector<double> do_y = interventional(scm, x);
        for (int y = 0; y < scm.n_y; ++y) {
            out.lhs += loss_at(scm, loss, y, classifier[static_cast<size_t>(x)]) *
                       do_y[static_cast<size_t>(y)] * px;
        }
    }
    for (int x = 0; x < scm.n_x; ++x) {
        for (int s = 0; s < 2; ++s) {
            const double weight_px = px_given_s_from_joint(scm, s, x);
            double px = 0.0;
            for (int ss = 0; ss < 2; ++ss) {
                for (int y = 0; y < scm.n_y; ++y) {
                    px += scm.joint(x, y, ss);
                }
            }
            for (int y = 0; y < scm.n_y; ++y) {
                out.rhs += loss_at(scm, loss, y, classifier[static_cast<size_t>(x)]) *
                           (px / weight_px) * scm.joint(x, y, s);
            }
        }
    }
    if (std::abs(out.lhs - out.rhs) > kScmTolerance) {
        throw Error("identity-violated", "risk decomposition: lhs " + format_double(out.lhs) +
                                             " vs rhs " + format_double(out.rhs));
    }
    return out;
}

double observational_risk(const DiscreteScm& scm, const std::vector<double>& loss,
                          const std::vector<int>& classifier) {
    validate_scm(scm);
    check_risk_inputs(scm, loss, classifier);
    double risk = 0.0;
    for (int x = 0; x < scm.n_x; ++x) {
        for (int y = 0; y < scm.n_y; ++y) {
            double pxy = 0.0;
            for (int s = 0; s < 2; ++s) {
                pxy += scm.joint(x, y, s);
            }
            risk += loss_at(scm, loss, y, classifier[static_cast<size_t>(x)]) * pxy;
        }
    }
    return risk;
}

PropensityPair propensity_identity(const DiscreteScm& scm, int x, int s) {
    validate_scm(scm);
    check_x(scm, x);
    if (s < 0 || s > 1) {
        throw Error("id-out-of-range", "s = " + std::to_string(s));
    }
    require_support(scm, x);

    // lhs route: P(x) by mixing the model's conditionals, P(x|s) from the
    // model field.
    double px = 0.0;
    for (int ss = 0; ss < 2; ++ss) {
        px += scm.p_s[static_cast<size_t>(ss)] * scm.px(ss, x);
    }
    PropensityPair out;
    out.lhs = px / scm.px(s, x);

    // rhs route: P(s|x) from the joint, P(s) by full marginalisation.
    double pxs = 0.0, px_joint = 0.0, ps = 0.0;
    for (int ss = 0; ss < 2; ++ss) {
        for (int y = 0; y < scm.n_y; ++y) {
            const double j = scm.joint(x, y, ss);
            px_joint += j;
            if (ss == s) {
                pxs += j;
            }
        }
    }
    for (int xx = 0; xx < scm.n_x; ++xx) {
        for (int y = 0; y < scm.n_y; ++y) {
            ps += scm.joint(xx, y, s);
        }
    }
    out.rhs = ps / (pxs / px_joint);
    if (std::abs(out.lhs - out.rhs) > kScmTolerance) {
        throw Error("identity-violated", "propensity: " + format_double(out.lhs) + " vs " +
                                             format_double(out.rhs));
    }
    return out;
}

namespace {

// Flat simplex via normalised exponentials; redraw until full support.
void fill_simplex_row(Rng& rng, double* row, size_t n) {
    constexpr double kMinEntry = 1e-3;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            row[i] = -std::log(1.0 - rng.uniform());
            sum += row[i];
        }
        bool ok = true;
        for (size_t i = 0; i < n; ++i) {
            row[i] /= sum;
            if (row[i] < kMinEntry) {
                ok = false;
            }
        }
        if (ok) {
            return;
        }
    }
    throw Error("internal", "simplex rejection failed to converge");
}

}  // namespace

DiscreteScm random_scm(Rng& rng, int n_x, int n_y, const ScmGenOptions& opts) {
    if (n_x < 2 || n_y < 2 || n_x > kScmMaxDomain || n_y > kScmMaxDomain) {
        throw Error("invalid-scm", "domain sizes must lie in [2, 16]");
    }
    DiscreteScm scm;
    scm.n_x = n_x;
    scm.n_y = n_y;
    if (opts.uniform_s) {
        scm.p_s = {0.5, 0.5};
    } else if (opts.fixed_p_s1 > 0.0 && opts.fixed_p_s1 < 1.0) {
        scm.p_s = {1.0 - opts.fixed_p_s1, opts.fixed_p_s1};
    } else {
        std::array<double, 2> row{};
        fill_simplex_row(rng, row.data(), 2);
        scm.p_s = row;
    }
    scm.p_x_given_s.resize(static_cast<size_t>(2 * n_x));
    scm.p_y_given_xs.resize(static_cast<size_t>(2 * n_x * n_y));
    for (int s = 0; s < 2; ++s) {
        fill_simplex_row(rng, &scm.p_x_given_s[static_cast<size_t>(s * n_x)],
                         static_cast<size_t>(n_x));
        for (int x = 0; x < n_x; ++x) {
            fill_simplex_row(rng, &scm.p_y_given_xs[static_cast<size_t>((s * n_x + x) * n_y)],
                             static_cast<size_t>(n_y));
        }
    }
    return scm;
}

double confounding_gap(const DiscreteScm& scm) {
    double gap = 0.0;
    for (int x = 0; x < scm.n_x; ++x) {
        const std::vector<double> obs = observational(scm, x);
        const std::vector<double> dox = interventional(scm, x);
        for (int y = 0; y < scm.n_y; ++y) {
            gap = std::max(gap, std::abs(obs[static_cast<size_t>(y)] - dox[static_cast<size_t>(y)]));
        }
    }
    return gap;
}

CausalCheckSummary run_causal_checks(uint64_t seed, int trials, int max_x, int max_y,
                                     const ScmGenOptions& opts) {
    if (trials < 1 || max_x < 2 || max_y < 2) {
        throw Error("invalid-argument", "need trials >= 1 and domains >= 2");
    }
    Rng rng(derive_seed(seed, "causal-checks"));
    CausalCheckSummary summary;
    summary.trials = trials;
    for (int t = 0; t < trials; ++t) {
        const int n_x = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(max_x - 1)));
        const int n_y = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(max_y - 1)));
        const DiscreteScm scm = random_scm(rng, n_x, n_y, opts);

        for (int x = 0; x < n_x; ++x) {
            const std::vector<double> iv = interventional(scm, x);
            const std::vector<double> bd = backdoor_adjust(scm, x);
            for (int y = 0; y < n_y; ++y) {
                summary.worst_backdoor_dev =
                    std::max(summary.worst_backdoor_dev,
                             std::abs(bd[static_cast<size_t>(y)] - iv[static_cast<size_t>(y)]));
                const auto chain = verify_a1_chain(scm, x, y);
                summary.worst_a1_final_dev =
                    std::max(summary.worst_a1_final_dev,
                             std::abs(chain.back().value - iv[static_cast<size_t>(y)]));
            }
            for (int s = 0; s < 2; ++s) {
                const PropensityPair pp = propensity_identity(scm, x, s);
                summary.worst_propensity_dev =
                    std::max(summary.worst_propensity_dev, std::abs(pp.lhs - pp.rhs));
                if (scm.p_s[0] == 0.5 && scm.p_s[1] == 0.5) {
                    double pxs = 0.0, px = 0.0;
                    for (int ss = 0; ss < 2; ++ss) {
                        for (int y = 0; y < n_y; ++y) {
                            const double j = scm.joint(x, y, ss);
                            px += j;
                            if (ss == s) {
                                pxs += j;
                            }
                        }
                    }
                    const double p_s_given_x = pxs / px;
                    summary.worst_uniform_const_dev =
                        std::max(summary.worst_uniform_const_dev,
                                 std::abs(pp.lhs - 0.5 / p_s_given_x));
                }
            }
        }

        std::vector<double> loss(static_cast<size_t>(n_y * n_y));
        for (double& v : loss) {
            v = rng.uniform();
        }
        std::vector<int> classifier(static_cast<size_t>(n_x));
        for (int& pred : classifier) {
            pred = static_cast<int>(rng.below(static_cast<uint64_t>(n_y)));
        }
        const RiskPair rp = risk_decomposition(scm, loss, classifier);
        summary.worst_risk_dev = std::max(summary.worst_risk_dev, std::abs(rp.lhs - rp.rhs));

        if (confounding_gap(scm) > 1e-6) {
            ++summary.confounded;
            if (std::abs(observational_risk(scm, loss, classifier) - rp.rhs) > kScmTolerance) {
                ++summary.risk_control_broken;
            }
            bool chain_broke = false;
            for (int x = 0; x < n_x && !chain_broke; ++x) {
                for (int y = 0; y < n_y && !chain_broke; ++y) {
                    try {
                        verify_a1_chain(scm, x, y, true);
                    } catch (const Error& e) {
                        if (e.kind() == "identity-violated") {
                            chain_broke = true;
                        } else {
                            throw;
                        }
                    }
                }
            }
            if (chain_broke) {
                ++summary.a1_control_broken;
            }
        }
    }
    return summary;
}

}  // namespace xerm
