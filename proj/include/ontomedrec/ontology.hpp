#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace omr {

enum class OntologyKind { diagnosis, procedure, medication };

const char* to_string(OntologyKind kind);
OntologyKind ontology_kind_from_string(const std::string& s);

using NodeIndex = std::uint32_t;
using IndexPair = std::pair<NodeIndex, NodeIndex>;

inline std::uint64_t pack_pair(NodeIndex a, NodeIndex b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

using PairSet = std::unordered_set<std::uint64_t>;

// A single-parent rooted hierarchy. Immutable once constructed; node ids are
// opaque strings compared exactly, internal work uses dense indices.
class OntologyDag {
public:
    OntologyDag(OntologyKind kind, std::vector<std::string> ids, std::vector<std::int32_t> parent);

    OntologyKind kind() const { return kind_; }
    std::size_t node_count() const { return ids_.size(); }
    std::size_t edge_count() const { return ids_.empty() ? 0 : ids_.size() - 1; }
    NodeIndex root() const { return root_; }

    const std::string& id_of(NodeIndex i) const { return ids_[i]; }
    NodeIndex index_of(const std::string& id) const;  // throws UnknownNode
    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    bool is_root(NodeIndex i) const { return parent_[i] < 0; }
    NodeIndex parent_of(NodeIndex i) const { return static_cast<NodeIndex>(parent_[i]); }
    const std::vector<NodeIndex>& children_of(NodeIndex i) const { return children_[i]; }

    bool has_edge(NodeIndex parent, NodeIndex child) const {
        return parent_[child] >= 0 && parent_of(child) == parent;
    }

    std::size_t depth_of_index(NodeIndex i) const;
    std::size_t max_depth() const;

    // Parent chain above `i`, nearest first (parent, grandparent, ..., root).
    std::vector<NodeIndex> ancestors_of(NodeIndex i) const;
    // All strict descendants of `i` (any depth).
    std::vector<NodeIndex> descendants_of(NodeIndex i) const;

private:
    void validate();

    OntologyKind kind_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, NodeIndex> index_;
    std::vector<std::int32_t> parent_;  // -1 for root
    std::vector<std::vector<NodeIndex>> children_;
    NodeIndex root_ = 0;
};

// Derived relation pairs, all expressed in node indices.
// parent_pairs: (parent, child) = the edge set.
// ancestor_pairs: (ancestor, descendant), path length >= 2. One-hop pairs are
// parents, never ancestors.
// sibling_pairs: unordered, stored with first < second.
struct RelationTriples {
    std::vector<IndexPair> parent_pairs;
    std::vector<IndexPair> ancestor_pairs;
    std::vector<IndexPair> sibling_pairs;

    PairSet parent_set;
    PairSet ancestor_set;
    PairSet sibling_set;  // holds both orientations

    bool is_parent(NodeIndex a, NodeIndex b) const { return parent_set.count(pack_pair(a, b)) != 0; }
    bool is_ancestor(NodeIndex a, NodeIndex b) const { return ancestor_set.count(pack_pair(a, b)) != 0; }
    bool is_sibling(NodeIndex a, NodeIndex b) const { return sibling_set.count(pack_pair(a, b)) != 0; }
};

inline constexpr std::size_t kUnboundedDepth = std::numeric_limits<std::size_t>::max();

OntologyDag load_ontology(const std::string& path, OntologyKind kind);
void save_ontology(const OntologyDag& dag, const std::string& path);

// Parse the `child<TAB>parent` edge-list format from an in-memory string.
OntologyDag parse_ontology(const std::string& text, OntologyKind kind, const std::string& origin);

RelationTriples derive_relations(const OntologyDag& dag, std::size_t max_depth = kUnboundedDepth);

std::size_t depth_of(const OntologyDag& dag, const std::string& node_id);

}  // namespace omr
