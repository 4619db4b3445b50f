#include "ontomedrec/grounding.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ontomedrec/errors.hpp"

namespace omr {

EmbeddingTable::EmbeddingTable(OntologyKind kind, std::vector<std::string> node_ids, int dim)
    : kind_(kind), dim_(dim), ids_(std::move(node_ids)) {
    if (dim <= 0) throw ConfigError("embedding dim must be positive");
    values_.assign(ids_.size() * dim_, 0.0);
    grads_.assign(ids_.size() * dim_, 0.0);
}

void EmbeddingTable::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

EmbeddingTable init_embeddings(const OntologyDag& dag, int dim, std::uint64_t seed) {
    std::vector<std::string> ids(dag.node_count());
    for (NodeIndex i = 0; i < dag.node_count(); ++i) ids[i] = dag.id_of(i);
    EmbeddingTable table(dag.kind(), std::move(ids), dim);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& v : table.values()) v = rng.uniform(-bound, bound);
    return table;
}

namespace {

inline double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
// With alpha = 1 the derivative is recoverable from the activation alone.
inline double elu_deriv_from_act(double a) { return a > 0.0 ? 1.0 : a + 1.0; }

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

std::size_t PredicateNet::param_count_for_dim(int dim) {
    const std::size_t d = static_cast<std::size_t>(dim);
    const std::size_t in = 2 * d;
    const std::size_t h1 = 2 * d;
    const std::size_t h2 = d;
    return h1 * in + h1 + h2 * h1 + h2 + h2 + 1;
}

PredicateNet::PredicateNet(std::string name, int dim, std::uint64_t seed)
    : name_(std::move(name)), dim_(dim) {
    if (dim <= 0) throw ConfigError("predicate dim must be positive");
    params_.assign(param_count_for_dim(dim), 0.0);
    grads_.assign(params_.size(), 0.0);
    Rng rng(seed);
    // He-style fan-in scaling; biases start at zero.
    const std::size_t d = static_cast<std::size_t>(dim);
    const std::size_t in = 2 * d, h1 = 2 * d, h2 = d;
    double* p = params_.data();
    const double b1 = std::sqrt(2.0 / static_cast<double>(in));
    for (std::size_t i = 0; i < h1 * in; ++i) *p++ = rng.uniform(-b1, b1);
    p += h1;
    const double b2 = std::sqrt(2.0 / static_cast<double>(h1));
    for (std::size_t i = 0; i < h2 * h1; ++i) *p++ = rng.uniform(-b2, b2);
    p += h2;
    const double b3 = std::sqrt(2.0 / static_cast<double>(h2));
    for (std::size_t i = 0; i < h2; ++i) *p++ = rng.uniform(-b3, b3);
}

void PredicateNet::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void PredicateNet::check_dims(std::size_t x_size, std::size_t y_size) const {
    if (x_size != static_cast<std::size_t>(dim_) || y_size != static_cast<std::size_t>(dim_))
        throw DimensionMismatch("predicate " + name_ + " expects two vectors of dim " +
                                std::to_string(dim_));
}

double PredicateNet::forward(std::span<const double> x, std::span<const double> y,
                             Cache& cache) const {
    check_dims(x.size(), y.size());
    const std::size_t d = static_cast<std::size_t>(dim_);
    const std::size_t in = 2 * d, h1 = 2 * d, h2 = d;
    const double* W1 = params_.data();
    const double* B1 = W1 + h1 * in;
    const double* W2 = B1 + h1;
    const double* B2 = W2 + h2 * h1;
    const double* W3 = B2 + h2;
    const double B3 = *(W3 + h2);

    cache.h1.resize(h1);
    cache.h2.resize(h2);
    for (std::size_t r = 0; r < h1; ++r) {
        const double* w = W1 + r * in;
        double z = B1[r];
        for (std::size_t c = 0; c < d; ++c) z += w[c] * x[c];
        for (std::size_t c = 0; c < d; ++c) z += w[d + c] * y[c];
        cache.h1[r] = elu(z);
    }
    for (std::size_t r = 0; r < h2; ++r) {
        const double* w = W2 + r * h1;
        double z = B2[r];
        for (std::size_t c = 0; c < h1; ++c) z += w[c] * cache.h1[c];
        cache.h2[r] = elu(z);
    }
    double z3 = B3;
    for (std::size_t c = 0; c < h2; ++c) z3 += W3[c] * cache.h2[c];
    cache.out = sigmoid(z3);
    return cache.out;
}

double PredicateNet::forward(std::span<const double> x, std::span<const double> y) const {
    Cache cache;
    return forward(x, y, cache);
}

void PredicateNet::backward(std::span<const double> x, std::span<const double> y,
                            const Cache& cache, double upstream, std::span<double> dx,
                            std::span<double> dy) {
    check_dims(x.size(), y.size());
    const std::size_t d = static_cast<std::size_t>(dim_);
    const std::size_t in = 2 * d, h1 = 2 * d, h2 = d;
    const double* W1 = params_.data();
    const double* W2 = W1 + h1 * in + h1;
    const double* W3 = W2 + h2 * h1 + h2;
    double* gW1 = grads_.data();
    double* gB1 = gW1 + h1 * in;
    double* gW2 = gB1 + h1;
    double* gB2 = gW2 + h2 * h1;
    double* gW3 = gB2 + h2;
    double* gB3 = gW3 + h2;

    const double dz3 = upstream * cache.out * (1.0 - cache.out);
    *gB3 += dz3;

    std::vector<double> dh2(h2);
    for (std::size_t c = 0; c < h2; ++c) {
        gW3[c] += dz3 * cache.h2[c];
        dh2[c] = dz3 * W3[c] * elu_deriv_from_act(cache.h2[c]);
    }
    std::vector<double> dh1(h1, 0.0);
    for (std::size_t r = 0; r < h2; ++r) {
        const double* w = W2 + r * h1;
        double* gw = gW2 + r * h1;
        const double dz = dh2[r];
        gB2[r] += dz;
        for (std::size_t c = 0; c < h1; ++c) {
            gw[c] += dz * cache.h1[c];
            dh1[c] += dz * w[c];
        }
    }
    for (std::size_t r = 0; r < h1; ++r) {
        const double dz = dh1[r] * elu_deriv_from_act(cache.h1[r]);
        const double* w = W1 + r * in;
        double* gw = gW1 + r * in;
        gB1[r] += dz;
        for (std::size_t c = 0; c < d; ++c) {
            gw[c] += dz * x[c];
            gw[d + c] += dz * y[c];
        }
        if (!dx.empty())
            for (std::size_t c = 0; c < d; ++c) dx[c] += dz * w[c];
        if (!dy.empty())
            for (std::size_t c = 0; c < d; ++c) dy[c] += dz * w[d + c];
    }
}

std::string predicate_name(const std::string& relation, OntologyKind kind) {
    return relation + "_" + to_string(kind);
}

// ---------------------------------------------------------------------------
// Checkpoint serialization: little-endian binary, versioned magic header.

namespace {

constexpr char kMagic[8] = {'O', 'M', 'R', 'C', 'K', 'P', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
}

double read_f64(std::istream& in) {
    std::uint64_t bits = read_u64(in);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

void write_str(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& in) {
    std::uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

void write_table(std::ostream& out, const EmbeddingTable& t) {
    write_u64(out, static_cast<std::uint64_t>(t.kind()));
    write_u64(out, t.rows());
    write_u64(out, static_cast<std::uint64_t>(t.dim()));
    for (const auto& id : t.node_ids()) write_str(out, id);
    for (double v : t.values()) write_f64(out, v);
}

EmbeddingTable read_table(std::istream& in) {
    auto kind = static_cast<OntologyKind>(read_u64(in));
    std::uint64_t rows = read_u64(in);
    int dim = static_cast<int>(read_u64(in));
    std::vector<std::string> ids(rows);
    for (auto& id : ids) id = read_str(in);
    EmbeddingTable t(kind, std::move(ids), dim);
    for (double& v : t.values()) v = read_f64(in);
    return t;
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_table(out, ckpt.diagnosis);
    write_table(out, ckpt.procedure);
    write_table(out, ckpt.medication);
    write_u64(out, ckpt.nets.size());
    for (const auto& net : ckpt.nets) {
        write_str(out, net.name());
        write_u64(out, static_cast<std::uint64_t>(net.dim()));
        write_u64(out, net.params().size());
        for (double v : net.params()) write_f64(out, v);
    }
    write_u64(out, static_cast<std::uint64_t>(ckpt.epochs_trained));
    write_u64(out, static_cast<std::uint64_t>(ckpt.procedure_epoch));
    write_u64(out, static_cast<std::uint64_t>(ckpt.alignment_epoch));
    write_f64(out, ckpt.sat_scores.diagnosis);
    write_f64(out, ckpt.sat_scores.procedure);
    write_f64(out, ckpt.sat_scores.medication);
    write_f64(out, ckpt.sat_scores.indication);
    write_str(out, ckpt.config_json);
    if (!out) throw IoError("write failed: " + path);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError("not a checkpoint file: " + path);
    ModelCheckpoint ckpt;
    ckpt.diagnosis = read_table(in);
    ckpt.procedure = read_table(in);
    ckpt.medication = read_table(in);
    std::uint64_t n_nets = read_u64(in);
    ckpt.nets.reserve(n_nets);
    for (std::uint64_t i = 0; i < n_nets; ++i) {
        std::string name = read_str(in);
        int dim = static_cast<int>(read_u64(in));
        std::uint64_t n_params = read_u64(in);
        PredicateNet net(name, dim, 0);
        if (net.params().size() != n_params)
            throw ParseError("checkpoint net " + name + " has unexpected parameter count");
        for (double& v : net.params()) v = read_f64(in);
        ckpt.nets.push_back(std::move(net));
    }
    ckpt.epochs_trained = static_cast<std::int64_t>(read_u64(in));
    ckpt.procedure_epoch = static_cast<std::int64_t>(read_u64(in));
    ckpt.alignment_epoch = static_cast<std::int64_t>(read_u64(in));
    ckpt.sat_scores.diagnosis = read_f64(in);
    ckpt.sat_scores.procedure = read_f64(in);
    ckpt.sat_scores.medication = read_f64(in);
    ckpt.sat_scores.indication = read_f64(in);
    ckpt.config_json = read_str(in);
    if (!in) throw ParseError("truncated checkpoint: " + path);
    return ckpt;
}

// ---------------------------------------------------------------------------
// Text export of the three tables.

namespace {

void write_table_rows(std::ostream& out, const EmbeddingTable& t) {
    char buf[64];
    for (std::size_t i = 0; i < t.rows(); ++i) {
        out << to_string(t.kind()) << '\t' << t.node_ids()[i] << '\t';
        auto row = t.row(i);
        for (int c = 0; c < t.dim(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
            if (c) out << ' ';
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace

void export_embeddings(const ModelCheckpoint& ckpt, const std::string& path) {
    if (ckpt.diagnosis.dim() != ckpt.procedure.dim() || ckpt.diagnosis.dim() != ckpt.medication.dim())
        throw DimensionMismatch("checkpoint tables disagree on dim");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embeddings: " + path);
    out << "dim=" << ckpt.diagnosis.dim() << '\n';
    write_table_rows(out, ckpt.diagnosis);
    write_table_rows(out, ckpt.procedure);
    write_table_rows(out, ckpt.medication);
    if (!out) throw IoError("write failed: " + path);
}

EmbeddingExport load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embeddings: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("dim=", 0) != 0)
        throw ParseError(path + ": missing dim= header");
    int dim = 0;
    try {
        dim = std::stoi(line.substr(4));
    } catch (const std::exception&) {
        throw ParseError(path + ": bad dim header: " + line);
    }
    if (dim <= 0) throw ParseError(path + ": bad dim header: " + line);

    struct Rows {
        std::vector<std::string> ids;
        std::vector<double> values;
    };
    Rows rows[3];

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind_s, id;
        if (!std::getline(ls, kind_s, '\t') || !std::getline(ls, id, '\t'))
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad row");
        Rows& r = rows[static_cast<int>(ontology_kind_from_string(kind_s))];
        r.ids.push_back(id);
        for (int c = 0; c < dim; ++c) {
            double v;
            if (!(ls >> v))
                throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(dim) + " values");
            r.values.push_back(v);
        }
    }

    EmbeddingExport result;
    result.dim = dim;
    auto build = [&](OntologyKind kind) {
        Rows& r = rows[static_cast<int>(kind)];
        EmbeddingTable t(kind, std::move(r.ids), dim);
        t.values() = std::move(r.values);
        return t;
    };
    result.diagnosis = build(OntologyKind::diagnosis);
    result.procedure = build(OntologyKind::procedure);
    result.medication = build(OntologyKind::medication);
    return result;
}

}  // namespace omr
