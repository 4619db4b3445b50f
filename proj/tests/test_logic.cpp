#include <doctest.h>

#include <cmath>
#include <vector>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/logic.hpp"
#include "ontomedrec/oracles.hpp"
#include "ontomedrec/rng.hpp"

using namespace omr;

TEST_CASE("fz_not") {
    LogicTape tape;
    CHECK(tape.fz_not(tape.leaf(0.0)).value == 1.0);
    CHECK(tape.fz_not(tape.leaf(1.0)).value == 0.0);
    CHECK(tape.fz_not(tape.leaf(0.2)).value == doctest::Approx(0.8));
}

TEST_CASE("fz_and is the product t-norm") {
    LogicTape tape;
    CHECK(tape.fz_and(tape.leaf(1.0), tape.leaf(0.37)).value == 0.37);
    CHECK(tape.fz_and(tape.leaf(0.0), tape.leaf(0.9)).value == 0.0);
    CHECK(tape.fz_and(tape.leaf(0.6), tape.leaf(0.5)).value == doctest::Approx(0.3));
}

TEST_CASE("fz_implies is the Reichenbach implication") {
    LogicTape tape;
    CHECK(tape.fz_implies(tape.leaf(1.0), tape.leaf(0.0)).value == 0.0);
    CHECK(tape.fz_implies(tape.leaf(0.0), tape.leaf(0.42)).value == 1.0);
    CHECK(tape.fz_implies(tape.leaf(0.5), tape.leaf(0.5)).value == 0.75);
}

TEST_CASE("forall on degenerate inputs") {
    LogicTape tape;
    AggregationConfig cfg;
    std::vector<TruthValue> ones{tape.leaf(1.0), tape.leaf(1.0), tape.leaf(1.0)};
    CHECK(tape.forall(ones, cfg.p_forall).value == 1.0);
    std::vector<TruthValue> zeros{tape.leaf(0.0), tape.leaf(0.0)};
    CHECK(tape.forall(zeros, cfg.p_forall).value == 0.0);
    std::vector<TruthValue> empty;
    CHECK_THROWS_AS(tape.forall(empty, cfg.p_forall), EmptyDomain);
}

TEST_CASE("forall matches the hand-evaluated p-mean-error value") {
    // 1 - sqrt(((1-0.6)^2 + (1-0.8)^2) / 2) = 1 - sqrt(0.1)
    LogicTape tape;
    std::vector<TruthValue> vs{tape.leaf(0.6), tape.leaf(0.8)};
    const double got = tape.forall(vs, 2.0).value;
    CHECK(got == doctest::Approx(1.0 - std::sqrt(0.1)).epsilon(1e-12));
    CHECK(got == doctest::Approx(oracle::p_mean_error({0.6, 0.8}, 2.0)).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.68377).epsilon(1e-4));
}

TEST_CASE("forall with all-equal inputs returns the common value") {
    LogicTape tape;
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const double v = rng.uniform();
        std::vector<TruthValue> vs;
        const std::size_t n = 1 + rng.below(9);
        for (std::size_t i = 0; i < n; ++i) vs.push_back(tape.leaf(v));
        CHECK(tape.forall(vs, 2.0).value == doctest::Approx(v).epsilon(1e-12));
        CHECK(tape.forall(vs, 3.5).value == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("sat_agg and the loss complement") {
    LogicTape tape;
    std::vector<TruthValue> allone{tape.leaf(1.0), tape.leaf(1.0)};
    TruthValue agg = tape.sat_agg(allone, 2.0);
    CHECK(agg.value == 1.0);
    CHECK(tape.fz_not(agg).value == 0.0);

    std::vector<TruthValue> allzero{tape.leaf(0.0), tape.leaf(0.0), tape.leaf(0.0)};
    CHECK(tape.sat_agg(allzero, 2.0).value == 0.0);

    // 1 - sqrt((0.01 + 0.09)/2) = 1 - sqrt(0.05)
    std::vector<TruthValue> mixed{tape.leaf(0.9), tape.leaf(0.7)};
    const double got = tape.sat_agg(mixed, 2.0).value;
    CHECK(got == doctest::Approx(1.0 - std::sqrt(0.05)).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.77639).epsilon(1e-4));

    std::vector<TruthValue> empty;
    CHECK_THROWS_AS(tape.sat_agg(empty, 2.0), EmptyKnowledgeBase);
}

TEST_CASE("connective outputs stay in [0,1] on random inputs") {
    LogicTape tape;
    Rng rng(17);
    for (int rep = 0; rep < 1000; ++rep) {
        TruthValue a = tape.leaf(rng.uniform());
        TruthValue b = tape.leaf(rng.uniform());
        for (TruthValue t : {tape.fz_not(a), tape.fz_and(a, b), tape.fz_implies(a, b)}) {
            CHECK(t.value >= 0.0);
            CHECK(t.value <= 1.0);
        }
        std::vector<TruthValue> vs;
        const std::size_t n = 1 + rng.below(6);
        for (std::size_t i = 0; i < n; ++i) vs.push_back(tape.leaf(rng.uniform()));
        const double p = 1.0 + rng.uniform() * 4.0;
        TruthValue f = tape.forall(vs, p);
        CHECK(f.value >= 0.0);
        CHECK(f.value <= 1.0);
        if (tape.size() > 100000) tape.clear();
    }
}

TEST_CASE("monotonicity of the connectives and aggregators") {
    LogicTape tape;
    Rng rng(23);
    for (int rep = 0; rep < 300; ++rep) {
        const double a = rng.uniform(), b = rng.uniform();
        const double a2 = a + (1.0 - a) * rng.uniform();  // a2 >= a
        CHECK(tape.fz_not(tape.leaf(a2)).value <= tape.fz_not(tape.leaf(a)).value);
        CHECK(tape.fz_and(tape.leaf(a2), tape.leaf(b)).value >=
              tape.fz_and(tape.leaf(a), tape.leaf(b)).value);
        // implication is monotone in the consequent
        CHECK(tape.fz_implies(tape.leaf(b), tape.leaf(a2)).value >=
              tape.fz_implies(tape.leaf(b), tape.leaf(a)).value);

        std::vector<double> vals;
        const std::size_t n = 1 + rng.below(5);
        for (std::size_t i = 0; i < n; ++i) vals.push_back(rng.uniform());
        const std::size_t bump = rng.below(n);
        std::vector<TruthValue> lo, hi;
        for (std::size_t i = 0; i < n; ++i) {
            lo.push_back(tape.leaf(vals[i]));
            hi.push_back(tape.leaf(i == bump ? vals[i] + (1.0 - vals[i]) * 0.5 : vals[i]));
        }
        CHECK(tape.forall(hi, 2.0).value >= tape.forall(lo, 2.0).value);
        CHECK(tape.sat_agg(hi, 3.0).value >= tape.sat_agg(lo, 3.0).value);
        if (tape.size() > 100000) tape.clear();
    }
}

namespace {

// Central finite difference of a scalar tape expression w.r.t. one leaf.
template <class Build>
double fd_wrt_leaf(Build build, std::vector<double> inputs, std::size_t which, double h = 1e-6) {
    auto eval = [&](double delta) {
        LogicTape tape;
        std::vector<TruthValue> leaves;
        for (std::size_t i = 0; i < inputs.size(); ++i)
            leaves.push_back(tape.leaf(inputs[i] + (i == which ? delta : 0.0)));
        return build(tape, leaves).value;
    };
    return (eval(h) - eval(-h)) / (2.0 * h);
}

template <class Build>
void check_gradients(Build build, std::size_t n_inputs, Rng& rng, double lo = 0.05,
                     double hi = 0.95) {
    std::vector<double> inputs;
    for (std::size_t i = 0; i < n_inputs; ++i) inputs.push_back(rng.uniform(lo, hi));
    LogicTape tape;
    std::vector<TruthValue> leaves;
    for (double v : inputs) leaves.push_back(tape.leaf(v));
    TruthValue out = build(tape, leaves);
    tape.backward(out);
    for (std::size_t i = 0; i < n_inputs; ++i) {
        const double analytic = tape.grad(leaves[i]);
        const double numeric = fd_wrt_leaf(build, inputs, i);
        const double err =
            std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
        CHECK(err < 1e-4);
    }
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(41);
    for (int rep = 0; rep < 200; ++rep) {
        check_gradients([](LogicTape& t, std::vector<TruthValue>& l) { return t.fz_not(l[0]); }, 1,
                        rng);
        check_gradients(
            [](LogicTape& t, std::vector<TruthValue>& l) { return t.fz_and(l[0], l[1]); }, 2, rng);
        check_gradients(
            [](LogicTape& t, std::vector<TruthValue>& l) { return t.fz_implies(l[0], l[1]); }, 2,
            rng);
        check_gradients(
            [](LogicTape& t, std::vector<TruthValue>& l) {
                return t.forall(std::span<const TruthValue>(l.data(), l.size()), 2.7);
            },
            5, rng);
        check_gradients(
            [](LogicTape& t, std::vector<TruthValue>& l) {
                // not(sat_agg(implies(and(a,b),c), forall(d,e)))
                std::vector<TruthValue> sats{
                    t.fz_implies(t.fz_and(l[0], l[1]), l[2]),
                    t.forall(std::span<const TruthValue>(l.data() + 3, 2), 2.0)};
                return t.fz_not(t.sat_agg(sats, 2.0));
            },
            5, rng);
    }
}

TEST_CASE("gradient of fz_not is -1 and fz_and partials are the co-factors") {
    LogicTape tape;
    TruthValue a = tape.leaf(0.3), b = tape.leaf(0.8);
    TruthValue n = tape.fz_not(a);
    tape.backward(n);
    CHECK(tape.grad(a) == -1.0);

    tape.clear();
    a = tape.leaf(0.3);
    b = tape.leaf(0.8);
    TruthValue c = tape.fz_and(a, b);
    tape.backward(c);
    CHECK(tape.grad(a) == 0.8);
    CHECK(tape.grad(b) == 0.3);
}
