#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scalefit {

/// One training observation: a WS run evaluated at a token snapshot.
struct RunRecord {
    std::string run_id;
    std::int64_t d_model = 0;
    std::int64_t d_model_base = 0;
    std::int64_t batch_size = 0;  // tokens per optimizer step
    double lr = 0.0;              // peak learning rate of the schedule
    std::int64_t seed = 0;
    std::int64_t tokens = 0;  // budget at the evaluation snapshot
    double val_loss = 0.0;    // nats

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Throws DataError naming the first violated field.
void validate(const RunRecord& record);

/// Immutable, validated collection of records in input order.
class RunSet {
public:
    RunSet() = default;
    /// Validates every record and the uniqueness invariants.
    explicit RunSet(std::vector<RunRecord> records, std::string provenance = {});

    const std::vector<RunRecord>& records() const noexcept { return records_; }
    const std::string& provenance() const noexcept { return provenance_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    auto begin() const noexcept { return records_.begin(); }
    auto end() const noexcept { return records_.end(); }

    /// Rows skipped during ingestion because their loss column was empty.
    std::size_t pending() const noexcept { return pending_; }
    void set_pending(std::size_t n) noexcept { pending_ = n; }

private:
    std::vector<RunRecord> records_;
    std::string provenance_;
    std::size_t pending_ = 0;
};

struct IngestOptions {
    /// Rows with an empty val_loss (e.g. a freshly emitted sweep plan) are
    /// counted in RunSet::pending() instead of failing the ingest.
    bool skip_pending = false;
};

RunSet ingest_csv(std::istream& in, const std::string& provenance = {}, const IngestOptions& options = {});
RunSet ingest_csv_file(const std::string& path, const IngestOptions& options = {});

/// Canonical emission: fixed header order, reals with 17 significant digits.
void emit_csv(const RunSet& runs, std::ostream& out);

inline constexpr const char* kCsvHeader = "run_id,d_model,d_model_base,batch_size,lr,seed,tokens,val_loss";

template <typename T>
struct Range {
    T lo;
    T hi;
    bool contains(T v) const { return lo <= v && v <= hi; }
    static Range exactly(T v) { return {v, v}; }
};

/// Conjunctive per-field constraints; an unset field is unconstrained.
struct RunFilter {
    std::optional<std::string> run_id;
    std::optional<Range<std::int64_t>> d_model;
    std::optional<Range<std::int64_t>> d_model_base;
    std::optional<Range<std::int64_t>> batch_size;
    std::optional<Range<double>> lr;
    std::optional<Range<std::int64_t>> seed;
    std::optional<Range<std::int64_t>> tokens;
    std::optional<Range<double>> val_loss;

    bool matches(const RunRecord& r) const;
    /// Intersection of both constraint sets (empty ranges are allowed).
    RunFilter operator&(const RunFilter& other) const;
};

RunSet filter(const RunSet& runs, const RunFilter& predicate);

struct OptimumCell {
    double log2_eta_star_mean = 0.0;
    double log2_eta_star_std = 0.0;  // population std across contributors
    int n_contributing = 0;

    double eta_star() const;
    /// One-sigma band mapped to linear eta* space (delta method).
    double eta_star_sigma() const;
};

/// (batch_size, tokens) -> aggregated optimum.
struct OptimumTable {
    std::map<std::pair<std::int64_t, std::int64_t>, OptimumCell> entries;
    /// Cells that could not contribute (fewer than two learning rates).
    std::vector<std::string> diagnostics;

    std::vector<std::int64_t> budgets() const;
};

struct AggregateOptions {
    /// Average across all widths of the single muP family in the set; when
    /// false the set must hold a single (d_model, d_model_base) model and only
    /// seeds are averaged.
    bool group_by_mup_family = true;
    /// Opt-in log-parabola refinement of each per-member optimum.
    bool refine_optimum = false;
};

OptimumTable aggregate_optima(const RunSet& runs, const AggregateOptions& options = {});

}  // namespace scalefit
