#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/grounding.hpp"
#include "ontomedrec/synth.hpp"
#include "testutil.hpp"

using namespace omr;

namespace {

OntologyDag tiny_dag(OntologyKind kind, std::size_t n, std::uint64_t seed) {
    OntologySpec spec;
    spec.kind = kind;
    spec.prefix = kind == OntologyKind::diagnosis ? "D" : kind == OntologyKind::procedure ? "P" : "M";
    spec.n_nodes = n;
    spec.max_depth = 3;
    return gen_ontology(spec, seed);
}

}  // namespace

TEST_CASE("init_embeddings is deterministic, shaped and bounded") {
    OntologyDag dag = tiny_dag(OntologyKind::diagnosis, 4, 3);
    EmbeddingTable a = init_embeddings(dag, 8, 123);
    EmbeddingTable b = init_embeddings(dag, 8, 123);
    CHECK(a.values() == b.values());
    CHECK(a.rows() == 4);
    CHECK(a.dim() == 8);
    CHECK(a.values().size() == 32);
    const double bound = 1.0 / std::sqrt(8.0);
    for (double v : a.values()) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }
    EmbeddingTable c = init_embeddings(dag, 8, 124);
    CHECK(a.values() != c.values());
}

TEST_CASE("an all-zero predicate net outputs sigmoid(0) = 0.5") {
    PredicateNet net("parent_diagnosis", 4, 7);
    std::fill(net.params().begin(), net.params().end(), 0.0);
    std::vector<double> x{0.3, -0.2, 0.9, 0.0}, y{0.5, 0.5, -0.1, 2.0};
    CHECK(net.forward(x, y) == 0.5);
}

TEST_CASE("hand-set tiny net matches the scalar composition") {
    // d = 1: concat(x, y) -> ELU(2) -> ELU(1) -> sigmoid
    PredicateNet net("parent_diagnosis", 1, 0);
    REQUIRE(net.param_count() == 11);
    // layout: W1(2x2) b1(2) W2(1x2) b2(1) W3(1) b3(1)
    std::vector<double> params{0.5, -0.3, 0.2, 0.7, 0.1, -0.2, 0.6, -0.4, 0.05, 0.8, -0.1};
    net.params() = params;
    const double x = 0.4, y = -0.9;

    auto elu = [](double z) { return z > 0 ? z : std::exp(z) - 1.0; };
    const double z1a = 0.5 * x + (-0.3) * y + 0.1;
    const double z1b = 0.2 * x + 0.7 * y + (-0.2);
    const double z2 = 0.6 * elu(z1a) + (-0.4) * elu(z1b) + 0.05;
    const double z3 = 0.8 * elu(z2) + (-0.1);
    const double want = 1.0 / (1.0 + std::exp(-z3));

    std::vector<double> vx{x}, vy{y};
    CHECK(net.forward(vx, vy) == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("predicate_forward is order-sensitive and throws on bad dims") {
    PredicateNet net("ancestor_medication", 3, 9);
    std::vector<double> x{0.1, 0.2, 0.3}, y{-0.4, 0.0, 0.8};
    CHECK(net.forward(x, y) != net.forward(y, x));
    std::vector<double> bad{0.1, 0.2};
    CHECK_THROWS_AS(net.forward(bad, y), DimensionMismatch);
}

TEST_CASE("predicate_backward matches finite differences") {
    Rng rng(55);
    PredicateNet net("sibling_procedure", 3, rng.next());
    std::vector<double> x{0.21, -0.73, 0.42}, y{-0.11, 0.35, 0.66};

    PredicateNet::Cache cache;
    net.forward(x, y, cache);
    net.zero_grads();
    std::vector<double> dx(3, 0.0), dy(3, 0.0);
    net.backward(x, y, cache, 1.0, dx, dy);
    std::vector<double> analytic = net.grads();

    const double h = 1e-6;
    for (std::size_t i = 0; i < net.param_count(); ++i) {
        const double saved = net.params()[i];
        net.params()[i] = saved + h;
        const double fp = net.forward(x, y);
        net.params()[i] = saved - h;
        const double fm = net.forward(x, y);
        net.params()[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) /
                           std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
        CHECK(err < 1e-4);
    }
    for (std::size_t c = 0; c < 3; ++c) {
        auto bump = [&](std::vector<double> vx, std::vector<double> vy, double d, bool on_x) {
            (on_x ? vx : vy)[c] += d;
            return net.forward(vx, vy);
        };
        const double nx = (bump(x, y, h, true) - bump(x, y, -h, true)) / (2.0 * h);
        const double ny = (bump(x, y, h, false) - bump(x, y, -h, false)) / (2.0 * h);
        CHECK(std::abs(dx[c] - nx) / std::max({std::abs(dx[c]), std::abs(nx), 1e-3}) < 1e-4);
        CHECK(std::abs(dy[c] - ny) / std::max({std::abs(dy[c]), std::abs(ny), 1e-3}) < 1e-4);
    }
}

TEST_CASE("predicate_backward scales linearly with the upstream gradient") {
    PredicateNet net("parent_medication", 2, 77);
    std::vector<double> x{0.5, -0.25}, y{0.3, 0.9};
    PredicateNet::Cache cache;
    net.forward(x, y, cache);

    net.zero_grads();
    std::vector<double> dx0(2, 0.0), dy0(2, 0.0);
    net.backward(x, y, cache, 0.0, dx0, dy0);
    for (double g : net.grads()) CHECK(g == 0.0);
    for (double g : dx0) CHECK(g == 0.0);

    net.zero_grads();
    std::vector<double> dx1(2, 0.0), dy1(2, 0.0);
    net.backward(x, y, cache, 1.0, dx1, dy1);
    std::vector<double> g1 = net.grads();

    net.zero_grads();
    std::vector<double> dx2(2, 0.0), dy2(2, 0.0);
    net.backward(x, y, cache, 2.0, dx2, dy2);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(net.grads()[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
    for (std::size_t c = 0; c < 2; ++c)
        CHECK(dx2[c] == doctest::Approx(2.0 * dx1[c]).epsilon(1e-12));
}

TEST_CASE("the ten predicate parameter sets are independent") {
    const int d = 4;
    std::vector<PredicateNet> nets;
    const char* relations[3] = {"parent", "sibling", "ancestor"};
    for (auto kind : {OntologyKind::diagnosis, OntologyKind::procedure, OntologyKind::medication})
        for (const char* rel : relations)
            nets.emplace_back(predicate_name(rel, kind), d, nets.size() + 1);
    nets.emplace_back("indication", d, 99);
    REQUIRE(nets.size() == 10);

    std::vector<double> x{0.1, 0.2, 0.3, 0.4}, y{0.4, 0.3, 0.2, 0.1};
    std::vector<double> before;
    for (const auto& n : nets) before.push_back(n.forward(x, y));
    for (double& p : nets[0].params()) p += 0.5;
    for (std::size_t i = 1; i < nets.size(); ++i) CHECK(nets[i].forward(x, y) == before[i]);
    CHECK(nets[0].forward(x, y) != before[0]);
}

namespace {

ModelCheckpoint make_checkpoint(int dim) {
    ModelCheckpoint ckpt;
    ckpt.diagnosis = init_embeddings(tiny_dag(OntologyKind::diagnosis, 6, 1), dim, 10);
    ckpt.procedure = init_embeddings(tiny_dag(OntologyKind::procedure, 5, 2), dim, 11);
    ckpt.medication = init_embeddings(tiny_dag(OntologyKind::medication, 4, 3), dim, 12);
    const char* relations[3] = {"parent", "sibling", "ancestor"};
    std::uint64_t seed = 20;
    for (auto kind : {OntologyKind::diagnosis, OntologyKind::procedure, OntologyKind::medication})
        for (const char* rel : relations)
            ckpt.nets.emplace_back(predicate_name(rel, kind), dim, seed++);
    ckpt.nets.emplace_back("indication", dim, seed);
    ckpt.epochs_trained = 9;
    ckpt.procedure_epoch = 4;
    ckpt.alignment_epoch = 7;
    ckpt.sat_scores = {0.9, 0.8, 0.7, 0.6};
    ckpt.config_json = "{\"dim\": 3}";
    return ckpt;
}

}  // namespace

TEST_CASE("checkpoint serialization round-trips bit-exactly") {
    ModelCheckpoint ckpt = make_checkpoint(3);
    test::TempDir dir;
    save_checkpoint(ckpt, dir.file("c.omr"));
    ModelCheckpoint back = load_checkpoint(dir.file("c.omr"));
    CHECK(back.diagnosis.values() == ckpt.diagnosis.values());
    CHECK(back.procedure.values() == ckpt.procedure.values());
    CHECK(back.medication.values() == ckpt.medication.values());
    CHECK(back.diagnosis.node_ids() == ckpt.diagnosis.node_ids());
    REQUIRE(back.nets.size() == ckpt.nets.size());
    for (std::size_t i = 0; i < back.nets.size(); ++i) {
        CHECK(back.nets[i].name() == ckpt.nets[i].name());
        CHECK(back.nets[i].params() == ckpt.nets[i].params());
    }
    CHECK(back.epochs_trained == 9);
    CHECK(back.procedure_epoch == 4);
    CHECK(back.alignment_epoch == 7);
    CHECK(back.sat_scores.indication == 0.6);
    CHECK(back.config_json == ckpt.config_json);

    CHECK_THROWS_AS(load_checkpoint(dir.file("missing.omr")), IoError);
    test::write_file(dir.file("junk.omr"), "not a checkpoint");
    CHECK_THROWS_AS(load_checkpoint(dir.file("junk.omr")), ParseError);
}

TEST_CASE("embedding export round-trips and carries every node") {
    ModelCheckpoint ckpt = make_checkpoint(3);
    test::TempDir dir;
    export_embeddings(ckpt, dir.file("emb.tsv"));

    const std::string text = test::read_file(dir.file("emb.tsv"));
    CHECK(text.rfind("dim=3\n", 0) == 0);
    const std::size_t rows = std::count(text.begin(), text.end(), '\n') - 1;
    CHECK(rows == ckpt.diagnosis.rows() + ckpt.procedure.rows() + ckpt.medication.rows());

    EmbeddingExport back = load_embeddings(dir.file("emb.tsv"));
    CHECK(back.dim == 3);
    CHECK(back.diagnosis.values() == ckpt.diagnosis.values());
    CHECK(back.procedure.values() == ckpt.procedure.values());
    CHECK(back.medication.values() == ckpt.medication.values());
    CHECK(back.medication.node_ids() == ckpt.medication.node_ids());
}
