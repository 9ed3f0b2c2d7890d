#include "scalefit/run_store.hpp"

#include "scalefit/error.hpp"
#include "scalefit/format.hpp"
#include "scalefit/profile.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace scalefit {

void validate(const RunRecord& r) {
    if (r.run_id.empty()) throw DataError("run_id must be non-empty");
    if (r.d_model < 1) throw DataError("d_model must be positive");
    if (r.d_model_base < 1) throw DataError("d_model_base must be positive");
    if (r.batch_size < 1) throw DataError("batch_size must be at least 1");
    if (!(r.lr > 0.0) || !std::isfinite(r.lr)) throw DataError("lr must be positive");
    if (!(r.val_loss > 0.0) || !std::isfinite(r.val_loss)) throw DataError("val_loss must be positive");
    if (r.tokens < r.batch_size) throw DataError("tokens must be at least batch_size");
}

RunSet::RunSet(std::vector<RunRecord> records, std::string provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {
    std::set<std::pair<std::string, std::int64_t>> snapshots;
    std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t, double, std::int64_t, std::int64_t>> configs;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        try {
            validate(r);
        } catch (const DataError& e) {
            throw DataError("record " + std::to_string(i + 1) + ": " + e.what());
        }
        if (!snapshots.emplace(r.run_id, r.tokens).second) {
            throw DataError("record " + std::to_string(i + 1) + ": duplicate (run_id, tokens) = (" + r.run_id + ", " +
                            std::to_string(r.tokens) + ")");
        }
        if (!configs.emplace(r.d_model, r.d_model_base, r.batch_size, r.lr, r.seed, r.tokens).second) {
            throw DataError("record " + std::to_string(i + 1) +
                            ": duplicate (d_model, d_model_base, batch_size, lr, seed, tokens) configuration");
        }
    }
}

namespace {

enum Field { kRunId, kDModel, kDModelBase, kBatchSize, kLr, kSeed, kTokens, kValLoss, kFieldCount };

constexpr std::array<const char*, kFieldCount> kFieldNames{"run_id", "d_model", "d_model_base", "batch_size",
                                                           "lr",     "seed",    "tokens",       "val_loss"};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

std::string trimmed(std::string s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

RunSet ingest_csv(std::istream& in, const std::string& provenance, const IngestOptions& options) {
    std::string line;
    // Skip a UTF-8 byte-order mark and leading blank lines.
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!blank(line)) {
            have_header = true;
            break;
        }
    }
    if (!have_header) throw DataError("empty CSV: no header row");

    std::array<int, kFieldCount> column{};
    column.fill(-1);
    const auto header = split_csv_line(line);
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = trimmed(header[i]);
        auto it = std::find(kFieldNames.begin(), kFieldNames.end(), name);
        if (it == kFieldNames.end()) throw DataError("unknown column '" + name + "'");
        const auto f = static_cast<std::size_t>(it - kFieldNames.begin());
        if (column[f] != -1) throw DataError("duplicate column '" + name + "'");
        column[f] = static_cast<int>(i);
    }
    for (std::size_t f = 0; f < kFieldCount; ++f) {
        // A missing seed column means every run used seed 0.
        if (column[f] == -1 && f != kSeed) throw DataError(std::string("missing column '") + kFieldNames[f] + "'");
    }

    std::vector<RunRecord> records;
    std::size_t row = 0;
    std::size_t pending = 0;
    while (std::getline(in, line)) {
        if (blank(line)) continue;
        ++row;
        const auto cells = split_csv_line(line);
        const auto where = [&](Field f) { return "row " + std::to_string(row) + ", field " + kFieldNames[f]; };
        if (cells.size() != header.size()) {
            throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(cells.size()));
        }
        auto cell = [&](Field f) { return trimmed(cells[static_cast<std::size_t>(column[f])]); };
        auto integer = [&](Field f) {
            std::int64_t v = 0;
            if (!parse_integer(cell(f), v)) throw DataError(where(f) + ": not an integer: '" + cell(f) + "'");
            return v;
        };
        auto realnum = [&](Field f) {
            double v = 0.0;
            if (!parse_real(cell(f), v)) throw DataError(where(f) + ": not a number: '" + cell(f) + "'");
            return v;
        };

        if (cell(kValLoss).empty()) {
            if (options.skip_pending) {
                ++pending;
                continue;
            }
            throw DataError(where(kValLoss) + ": val_loss missing");
        }
        RunRecord r;
        r.run_id = cell(kRunId);
        r.d_model = integer(kDModel);
        r.d_model_base = integer(kDModelBase);
        r.batch_size = integer(kBatchSize);
        r.lr = realnum(kLr);
        r.seed = column[kSeed] == -1 ? 0 : integer(kSeed);
        r.tokens = integer(kTokens);
        r.val_loss = realnum(kValLoss);
        try {
            validate(r);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row) + ": " + e.what());
        }
        records.push_back(std::move(r));
    }
    if (records.empty() && pending == 0) throw DataError("empty CSV: no data rows");
    RunSet out(std::move(records), provenance);
    out.set_pending(pending);
    return out;
}

RunSet ingest_csv_file(const std::string& path, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return ingest_csv(in, path, options);
}

void emit_csv(const RunSet& runs, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& r : runs) {
        std::string id = r.run_id;
        if (id.find_first_of(",\"") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : id) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            id = quoted + '"';
        }
        out << id << ',' << r.d_model << ',' << r.d_model_base << ',' << r.batch_size << ',' << format_g17(r.lr)
            << ',' << r.seed << ',' << r.tokens << ',' << format_g17(r.val_loss) << '\n';
    }
}

bool RunFilter::matches(const RunRecord& r) const {
    if (run_id && *run_id != r.run_id) return false;
    if (d_model && !d_model->contains(r.d_model)) return false;
    if (d_model_base && !d_model_base->contains(r.d_model_base)) return false;
    if (batch_size && !batch_size->contains(r.batch_size)) return false;
    if (lr && !lr->contains(r.lr)) return false;
    if (seed && !seed->contains(r.seed)) return false;
    if (tokens && !tokens->contains(r.tokens)) return false;
    if (val_loss && !val_loss->contains(r.val_loss)) return false;
    return true;
}

namespace {

template <typename T>
std::optional<Range<T>> intersect(const std::optional<Range<T>>& a, const std::optional<Range<T>>& b) {
    if (!a) return b;
    if (!b) return a;
    return Range<T>{std::max(a->lo, b->lo), std::min(a->hi, b->hi)};
}

}  // namespace

RunFilter RunFilter::operator&(const RunFilter& other) const {
    RunFilter out;
    if (run_id && other.run_id && *run_id != *other.run_id) {
        // Contradictory ids: keep one and make the seed range empty.
        out.run_id = run_id;
        out.seed = Range<std::int64_t>{1, 0};
    } else {
        out.run_id = run_id ? run_id : other.run_id;
    }
    out.d_model = intersect(d_model, other.d_model);
    out.d_model_base = intersect(d_model_base, other.d_model_base);
    out.batch_size = intersect(batch_size, other.batch_size);
    out.lr = intersect(lr, other.lr);
    if (!out.seed) out.seed = intersect(seed, other.seed);
    out.tokens = intersect(tokens, other.tokens);
    out.val_loss = intersect(val_loss, other.val_loss);
    return out;
}

RunSet filter(const RunSet& runs, const RunFilter& predicate) {
    std::vector<RunRecord> kept;
    for (const auto& r : runs) {
        if (predicate.matches(r)) kept.push_back(r);
    }
    return RunSet(std::move(kept), runs.provenance());
}

double OptimumCell::eta_star() const { return std::exp2(log2_eta_star_mean); }

double OptimumCell::eta_star_sigma() const { return eta_star() * std::log(2.0) * log2_eta_star_std; }

std::vector<std::int64_t> OptimumTable::budgets() const {
    std::set<std::int64_t> out;
    for (const auto& [key, cell] : entries) out.insert(key.second);
    return {out.begin(), out.end()};
}

OptimumTable aggregate_optima(const RunSet& runs, const AggregateOptions& options) {
    std::set<std::int64_t> bases;
    std::set<std::pair<std::int64_t, std::int64_t>> models;
    for (const auto& r : runs) {
        bases.insert(r.d_model_base);
        models.emplace(r.d_model, r.d_model_base);
    }
    if (bases.size() > 1) {
        throw DataError("aggregate_optima: records span several muP families (d_model_base); filter to one");
    }
    if (!options.group_by_mup_family && models.size() > 1) {
        throw DataError("aggregate_optima: records span several models; filter to one or group by muP family");
    }

    // (B, T, d_model, seed) -> profile points
    using CellKey = std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>;
    std::map<CellKey, std::vector<ProfilePoint>> cells;
    std::int64_t base = bases.empty() ? 0 : *bases.begin();
    for (const auto& r : runs) {
        cells[{r.batch_size, r.tokens, r.d_model, r.seed}].push_back({r.lr, r.val_loss});
    }

    OptimumTable table;
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<double>> members;
    for (auto& [key, points] : cells) {
        const auto& [b, t, d, seed] = key;
        if (points.size() < 2) {
            table.diagnostics.push_back("skipped cell (batch_size=" + std::to_string(b) + ", tokens=" +
                                        std::to_string(t) + ", d_model=" + std::to_string(d) + ", seed=" +
                                        std::to_string(seed) + "): fewer than 2 learning rates");
            continue;
        }
        std::sort(points.begin(), points.end(), [](const auto& x, const auto& y) { return x.lr < y.lr; });
        LossProfile profile{ProfileContext{b, t, d, base, seed}, std::move(points)};
        const auto opt = find_optimum(profile, options.refine_optimum);
        members[{b, t}].push_back(std::log2(opt.eta_star));
    }

    for (const auto& [key, logs] : members) {
        OptimumCell cell;
        cell.n_contributing = static_cast<int>(logs.size());
        double sum = 0.0;
        for (double v : logs) sum += v;
        const auto [lo, hi] = std::minmax_element(logs.begin(), logs.end());
        cell.log2_eta_star_mean = std::clamp(sum / static_cast<double>(logs.size()), *lo, *hi);
        if (*lo < *hi) {
            double ss = 0.0;
            for (double v : logs) ss += (v - cell.log2_eta_star_mean) * (v - cell.log2_eta_star_mean);
            cell.log2_eta_star_std = std::sqrt(ss / static_cast<double>(logs.size()));
        }
        table.entries.emplace(key, cell);
    }
    return table;
}

}  // namespace scalefit
