#pragma once

#include <set>
#include <vector>

#include "ontomedrec/ehr.hpp"
#include "ontomedrec/ontology.hpp"

// Brute-force reference implementations, deliberately independent of the
// algorithms they check: closures by explicit graph search over the raw edge
// list, relation scans over all node pairs, metrics over std::set operations.
namespace omr::oracle {

// Ordered (u, v) pairs with a directed path u -> ... -> v of length >= 1.
PairSet reachable_pairs(const OntologyDag& dag);

RelationTriples derive_relations_bruteforce(const OntologyDag& dag,
                                            std::size_t max_depth = kUnboundedDepth);

// All dag edges with both endpoints inside `nodes` (pair scan).
std::vector<IndexPair> edges_within(const OntologyDag& dag, const std::vector<NodeIndex>& nodes);

std::vector<NodeIndex> descendants_bruteforce(const OntologyDag& dag, NodeIndex n);

double jaccard_sets(const std::set<std::size_t>& truth, const std::set<std::size_t>& pred);
void precision_recall_f1_sets(const std::set<std::size_t>& truth, const std::set<std::size_t>& pred,
                              double& precision, double& recall, double& f1);
double ddi_sets(const std::vector<std::set<std::size_t>>& admissions, const DdiMatrix& D);

// Scalar re-implementation of the p-mean-error aggregator.
double p_mean_error(const std::vector<double>& values, double p);

}  // namespace omr::oracle
