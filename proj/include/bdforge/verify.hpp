#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bdforge/space.hpp"

namespace bdforge {

struct AuditReport {
    std::string lemma_id;
    std::string configuration;
    // Ordered key/value observations so serialized reports are deterministic.
    std::vector<std::pair<std::string, Rational>> observed;
    std::optional<Rational> bound;
    std::string verdict;  // asserted-pass | observed-only | fail
    std::vector<std::string> toy_flags;
    std::uint64_t census = 0;  // candidates scanned
};

// Max over materialized gamma of rank <= Q and prefix lengths m of the l1
// norm of P*_m e*_gamma taken in e*-coordinates, against the bound 2.
AuditReport audit_projection_norm(const Registry& reg, std::uint64_t Q);

// |e*_gamma(n_j^{-1} sum_{G} d_xi)| against the two weight-branch bounds,
// plus the summed-family corollary on the weighted average.
AuditReport audit_basis_average(const Registry& reg, std::uint64_t j,
                                const std::vector<NodeId>& G,
                                std::uint64_t cutoff_rank);

// Tail-projected averages of a certified C-RIS against the two weight
// branches and the certified-norm bound on the plain average.
AuditReport audit_ris_averages(const Registry& reg,
                               const std::vector<VectorX>& xs, const Rational& C,
                               std::uint64_t s, std::uint64_t cutoff_rank);

struct SuiteSummary {
    std::vector<AuditReport> reports;
    int exit_code = 0;  // 0 pass/observed, 1 any fail
};

// Known suite names: "2.4", "3.3", "5.2", "6.4" (or "all").  Unknown names
// raise unknown-audit.  Fixtures are built internally and deterministically.
SuiteSummary run_suite(const std::vector<std::string>& names);

std::string report_to_json(const AuditReport& rep);
std::string suite_to_json(const SuiteSummary& s);
std::string suite_to_csv(const SuiteSummary& s);

// Writes <out_path>.json and <out_path>.csv, each with a one-line timestamp
// header followed by deterministic content.
void write_suite(const SuiteSummary& s, const std::string& out_path);

}  // namespace bdforge
