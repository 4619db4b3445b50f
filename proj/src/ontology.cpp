#include "ontomedrec/ontology.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "ontomedrec/errors.hpp"

namespace omr {

const char* to_string(OntologyKind kind) {
    switch (kind) {
        case OntologyKind::diagnosis: return "diagnosis";
        case OntologyKind::procedure: return "procedure";
        case OntologyKind::medication: return "medication";
    }
    return "?";
}

OntologyKind ontology_kind_from_string(const std::string& s) {
    if (s == "diagnosis") return OntologyKind::diagnosis;
    if (s == "procedure") return OntologyKind::procedure;
    if (s == "medication") return OntologyKind::medication;
    throw ConfigError("unknown ontology kind: " + s);
}

OntologyDag::OntologyDag(OntologyKind kind, std::vector<std::string> ids,
                         std::vector<std::int32_t> parent)
    : kind_(kind), ids_(std::move(ids)), parent_(std::move(parent)) {
    index_.reserve(ids_.size());
    for (NodeIndex i = 0; i < ids_.size(); ++i) index_[ids_[i]] = i;
    children_.resize(ids_.size());
    for (NodeIndex i = 0; i < ids_.size(); ++i)
        if (parent_[i] >= 0) children_[parent_[i]].push_back(i);
    validate();
}

NodeIndex OntologyDag::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownNode("unknown node id: " + id);
    return it->second;
}

void OntologyDag::validate() {
    if (ids_.empty()) throw ParseError("ontology has no nodes");
    std::vector<NodeIndex> roots;
    for (NodeIndex i = 0; i < ids_.size(); ++i)
        if (parent_[i] < 0) roots.push_back(i);
    if (roots.empty()) throw CycleError("every node has a parent; the edge set contains a cycle");
    if (roots.size() > 1) {
        std::string msg = "multiple roots:";
        for (auto r : roots) msg += " " + ids_[r];
        throw OrphanError(msg);
    }
    root_ = roots[0];

    // Single parent + unique root means any node unreachable from the root
    // sits on a directed cycle.
    std::vector<char> seen(ids_.size(), 0);
    std::deque<NodeIndex> queue{root_};
    seen[root_] = 1;
    std::size_t reached = 0;
    while (!queue.empty()) {
        NodeIndex n = queue.front();
        queue.pop_front();
        ++reached;
        for (NodeIndex c : children_[n])
            if (!seen[c]) {
                seen[c] = 1;
                queue.push_back(c);
            }
    }
    if (reached != ids_.size()) {
        for (NodeIndex i = 0; i < ids_.size(); ++i)
            if (!seen[i]) throw CycleError("cycle detected involving node " + ids_[i]);
    }
}

std::size_t OntologyDag::depth_of_index(NodeIndex i) const {
    std::size_t d = 0;
    while (parent_[i] >= 0) {
        i = parent_of(i);
        ++d;
    }
    return d;
}

std::size_t OntologyDag::max_depth() const {
    // Depth of each node is depth(parent) + 1; a BFS order visits parents first.
    std::vector<std::size_t> depth(ids_.size(), 0);
    std::size_t best = 0;
    std::deque<NodeIndex> queue{root_};
    while (!queue.empty()) {
        NodeIndex n = queue.front();
        queue.pop_front();
        best = std::max(best, depth[n]);
        for (NodeIndex c : children_[n]) {
            depth[c] = depth[n] + 1;
            queue.push_back(c);
        }
    }
    return best;
}

std::vector<NodeIndex> OntologyDag::ancestors_of(NodeIndex i) const {
    std::vector<NodeIndex> chain;
    while (parent_[i] >= 0) {
        i = parent_of(i);
        chain.push_back(i);
    }
    return chain;
}

std::vector<NodeIndex> OntologyDag::descendants_of(NodeIndex i) const {
    std::vector<NodeIndex> out;
    std::vector<NodeIndex> stack{i};
    while (!stack.empty()) {
        NodeIndex n = stack.back();
        stack.pop_back();
        for (NodeIndex c : children_[n]) {
            out.push_back(c);
            stack.push_back(c);
        }
    }
    return out;
}

namespace {

void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

}  // namespace

OntologyDag parse_ontology(const std::string& text, OntologyKind kind, const std::string& origin) {
    std::vector<std::string> ids;
    std::unordered_map<std::string, NodeIndex> index;
    std::vector<std::int32_t> parent;

    auto intern = [&](const std::string& id) -> NodeIndex {
        auto it = index.find(id);
        if (it != index.end()) return it->second;
        NodeIndex i = static_cast<NodeIndex>(ids.size());
        ids.push_back(id);
        parent.push_back(-1);
        index.emplace(id, i);
        return i;
    };

    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::size_t edge_lines = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
            line.find('\t', tab + 1) != std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(lineno) +
                             ": expected 'child<TAB>parent', got: " + line);
        }
        std::string child = line.substr(0, tab);
        std::string par = line.substr(tab + 1);
        if (child == par)
            throw CycleError(origin + ":" + std::to_string(lineno) + ": self-loop on node " + child);
        NodeIndex ci = intern(child);
        NodeIndex pi = intern(par);
        if (parent[ci] >= 0) {
            if (static_cast<NodeIndex>(parent[ci]) == pi) continue;  // duplicate line
            throw MultiParentError(origin + ":" + std::to_string(lineno) + ": node " + child +
                                   " has parents " + ids[parent[ci]] + " and " + par);
        }
        parent[ci] = static_cast<std::int32_t>(pi);
        ++edge_lines;
    }
    if (edge_lines == 0) throw ParseError(origin + ": no edges found");
    return OntologyDag(kind, std::move(ids), std::move(parent));
}

OntologyDag load_ontology(const std::string& path, OntologyKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open ontology file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ontology(buf.str(), kind, path);
}

void save_ontology(const OntologyDag& dag, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write ontology file: " + path);
    for (NodeIndex i = 0; i < dag.node_count(); ++i) {
        if (dag.is_root(i)) continue;
        out << dag.id_of(i) << '\t' << dag.id_of(dag.parent_of(i)) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

RelationTriples derive_relations(const OntologyDag& dag, std::size_t max_depth) {
    RelationTriples rel;
    for (NodeIndex i = 0; i < dag.node_count(); ++i) {
        if (dag.is_root(i)) continue;
        NodeIndex p = dag.parent_of(i);
        rel.parent_pairs.emplace_back(p, i);
        rel.parent_set.insert(pack_pair(p, i));
        // Walk the chain above the parent; hop count starts at 2.
        std::size_t hops = 2;
        NodeIndex a = p;
        while (!dag.is_root(a) && hops <= max_depth) {
            a = dag.parent_of(a);
            rel.ancestor_pairs.emplace_back(a, i);
            rel.ancestor_set.insert(pack_pair(a, i));
            ++hops;
        }
    }
    for (NodeIndex p = 0; p < dag.node_count(); ++p) {
        const auto& kids = dag.children_of(p);
        for (std::size_t a = 0; a < kids.size(); ++a)
            for (std::size_t b = a + 1; b < kids.size(); ++b) {
                NodeIndex x = std::min(kids[a], kids[b]);
                NodeIndex y = std::max(kids[a], kids[b]);
                rel.sibling_pairs.emplace_back(x, y);
                rel.sibling_set.insert(pack_pair(x, y));
                rel.sibling_set.insert(pack_pair(y, x));
            }
    }
    return rel;
}

std::size_t depth_of(const OntologyDag& dag, const std::string& node_id) {
    return dag.depth_of_index(dag.index_of(node_id));
}

}  // namespace omr
