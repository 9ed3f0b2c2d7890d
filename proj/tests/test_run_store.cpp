#include "scalefit/error.hpp"
#include "scalefit/mup.hpp"
#include "scalefit/run_store.hpp"
#include "scalefit/synth_oracle.hpp"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace scalefit;
using ::testing::HasSubstr;

namespace {

const std::string kHeader = std::string(kCsvHeader) + "\n";

RunSet parse(const std::string& text, IngestOptions options = {}) {
    std::istringstream in(text);
    return ingest_csv(in, "memory", options);
}

std::string ingest_error(const std::string& text) {
    try {
        parse(text);
    } catch (const DataError& e) {
        return e.what();
    }
    return "no error";
}

RunRecord rec(std::string id, std::int64_t d, std::int64_t b, double lr, std::int64_t t, double loss,
              std::int64_t seed = 0, std::int64_t base = 1024) {
    return RunRecord{std::move(id), d, base, b, lr, seed, t, loss};
}

// Three-point profile with its minimum at `opt` (an lr in {2^-10, 2^-9.5, 2^-9, 2^-8.5, 2^-8}).
void add_profile(std::vector<RunRecord>& out, std::int64_t d, double log2_opt, std::int64_t seed = 0,
                 std::int64_t batch = 1 << 20, std::int64_t tokens = std::int64_t{1} << 30) {
    for (double e : {-10.0, -9.5, -9.0, -8.5, -8.0}) {
        const double loss = 3.0 + 0.1 * (e - log2_opt) * (e - log2_opt);
        out.push_back(rec("m" + std::to_string(d) + "-s" + std::to_string(seed) + "-b" + std::to_string(batch) + "-e" +
                              std::to_string(e),
                          d, batch, std::exp2(e), tokens, loss, seed));
    }
}

}  // namespace

TEST(Ingest, SingleRow) {
    const auto rs = parse(kHeader + "r1,1024,1024,1048576,0.001953125,0,1073741824,3.40\n");
    ASSERT_EQ(rs.size(), 1u);
    const auto& r = rs.records().front();
    EXPECT_EQ(r.run_id, "r1");
    EXPECT_EQ(r.lr, std::exp2(-9.0));
    EXPECT_EQ(r.batch_size, 1 << 20);
    EXPECT_EQ(r.tokens, std::int64_t{1} << 30);
    EXPECT_EQ(r.val_loss, 3.40);
    EXPECT_EQ(rs.provenance(), "memory");
}

TEST(Ingest, AnyColumnOrderPowerNotationAndDefaultSeed) {
    const auto rs = parse("val_loss,tokens,lr,batch_size,d_model_base,d_model,run_id\n"
                          "3.5,2^30,2^-9.5,2^20,1024,512,x\n");
    ASSERT_EQ(rs.size(), 1u);
    const auto& r = rs.records().front();
    EXPECT_EQ(r.seed, 0);
    EXPECT_EQ(r.d_model, 512);
    EXPECT_DOUBLE_EQ(r.lr, std::exp2(-9.5));
    EXPECT_EQ(r.tokens, std::int64_t{1} << 30);
}

TEST(Ingest, Errors) {
    EXPECT_THAT(ingest_error(kHeader + "r1,1024,1024,1048576,2^-9,0,1073741824,-1\n"),
                HasSubstr("val_loss must be positive"));
    EXPECT_THAT(ingest_error("run_id,d_model,d_model_base,batch_size,lr,seed,tokens\n"), HasSubstr("val_loss"));
    EXPECT_THAT(ingest_error(""), HasSubstr("empty"));
    EXPECT_THAT(ingest_error(kHeader), HasSubstr("empty"));

    const auto bad = ingest_error(kHeader + "r1,1024,1024,1048576,2^-9,0,1073741824,3.4\n"
                                            "r2,1024,1024,1048576,abc,0,1073741824,3.4\n");
    EXPECT_THAT(bad, HasSubstr("row 2"));
    EXPECT_THAT(bad, HasSubstr("lr"));

    EXPECT_THAT(ingest_error(kHeader + "r1,1024,1024,1048576,2^-9,0,1024,3.4\n"), HasSubstr("tokens"));
    EXPECT_THAT(ingest_error(kHeader + "r1,1024,1024,1048576,2^-9,0,1073741824,3.4\n"
                                       "r1,1024,1024,1048576,2^-8,0,1073741824,3.4\n"),
                HasSubstr("duplicate"));
}

TEST(Ingest, PendingRowsNeedOptIn) {
    const std::string text = kHeader + "r1,1024,1024,1048576,2^-9,0,1073741824,3.4\n"
                                       "r2,1024,1024,1048576,2^-8,0,1073741824,\n";
    EXPECT_THROW(parse(text), DataError);
    const auto rs = parse(text, IngestOptions{true});
    EXPECT_EQ(rs.size(), 1u);
    EXPECT_EQ(rs.pending(), 1u);
}

TEST(Ingest, FullGridRoundTripsByteIdentically) {
    const auto grid = enumerate_grid();
    const std::vector<std::int64_t> seeds{0};
    const auto runs = gen_surface(OracleSpec::reference(), synth_points(grid, seeds));
    ASSERT_EQ(runs.size(), grid.size());

    std::ostringstream first;
    emit_csv(runs, first);
    const auto back = parse(first.str());
    EXPECT_EQ(back.records(), runs.records());
    std::ostringstream second;
    emit_csv(back, second);
    EXPECT_EQ(first.str(), second.str());
}

TEST(Filter, Examples) {
    std::vector<RunRecord> v;
    for (std::int64_t b : {1 << 18, 1 << 20, 1 << 22}) {
        for (int k : {30, 35, 37}) v.push_back(rec("r" + std::to_string(b), 1024, b, 1e-3, std::int64_t{1} << k, 3.0));
    }
    const RunSet rs(v);

    RunFilter by_batch;
    by_batch.batch_size = Range<std::int64_t>::exactly(1 << 20);
    const auto only = filter(rs, by_batch);
    EXPECT_EQ(only.size(), 3u);
    EXPECT_TRUE(std::all_of(only.begin(), only.end(), [](const auto& r) { return r.batch_size == 1 << 20; }));

    RunFilter by_tokens;
    by_tokens.tokens = Range<std::int64_t>{std::int64_t{1} << 30, std::int64_t{1} << 35};
    const auto windowed = filter(rs, by_tokens);
    EXPECT_EQ(windowed.size(), 6u);
    EXPECT_TRUE(std::none_of(windowed.begin(), windowed.end(),
                             [](const auto& r) { return r.tokens == std::int64_t{1} << 37; }));

    EXPECT_EQ(filter(rs, RunFilter{}).records(), rs.records());

    // filter o filter equals filter by the conjunction, order preserved
    EXPECT_EQ(filter(filter(rs, by_batch), by_tokens).records(), filter(rs, by_batch & by_tokens).records());
    RunFilter none;
    none.tokens = Range<std::int64_t>{std::int64_t{1} << 36, std::int64_t{1} << 36};
    EXPECT_TRUE(filter(rs, none).empty());
}

TEST(Aggregate, LogMeanAcrossFamily) {
    std::vector<RunRecord> v;
    add_profile(v, 256, -9.0);
    add_profile(v, 512, -9.0);
    add_profile(v, 1024, -8.5);
    const auto table = aggregate_optima(RunSet(v));
    ASSERT_EQ(table.entries.size(), 1u);
    const auto& cell = table.entries.begin()->second;
    EXPECT_EQ(cell.n_contributing, 3);
    EXPECT_NEAR(cell.log2_eta_star_mean, -8.8333333333333333, 1e-12);
    EXPECT_NEAR(cell.eta_star(), 2.193e-3, 1e-6);
    EXPECT_NEAR(cell.log2_eta_star_std, std::sqrt(1.0 / 18.0), 1e-12);
    EXPECT_NEAR(cell.eta_star_sigma(), cell.eta_star() * std::log(2.0) * std::sqrt(1.0 / 18.0), 1e-15);
    EXPECT_TRUE(table.diagnostics.empty());
}

TEST(Aggregate, SingleMemberAndIdenticalOptima) {
    std::vector<RunRecord> one;
    add_profile(one, 1024, -9.0);
    const auto t1 = aggregate_optima(RunSet(one), AggregateOptions{false, false});
    const auto& c1 = t1.entries.begin()->second;
    EXPECT_EQ(c1.log2_eta_star_mean, -9.0);
    EXPECT_EQ(c1.log2_eta_star_std, 0.0);
    EXPECT_EQ(c1.n_contributing, 1);

    std::vector<RunRecord> three;
    for (std::int64_t d : {256, 512, 1024}) add_profile(three, d, -8.5);
    EXPECT_EQ(aggregate_optima(RunSet(three)).entries.begin()->second.log2_eta_star_std, 0.0);
}

TEST(Aggregate, SeedsOnlyWhenUngrouped) {
    std::vector<RunRecord> v;
    add_profile(v, 1024, -9.0, 0);
    add_profile(v, 1024, -8.0, 1);
    add_profile(v, 512, -10.0, 0);
    EXPECT_THROW(aggregate_optima(RunSet(v), AggregateOptions{false, false}), DataError);

    RunFilter f;
    f.d_model = Range<std::int64_t>::exactly(1024);
    const auto t = aggregate_optima(filter(RunSet(v), f), AggregateOptions{false, false});
    const auto& c = t.entries.begin()->second;
    EXPECT_EQ(c.n_contributing, 2);
    EXPECT_EQ(c.log2_eta_star_mean, -8.5);

    const auto grouped = aggregate_optima(RunSet(v));
    EXPECT_EQ(grouped.entries.begin()->second.n_contributing, 3);
}

TEST(Aggregate, ThinCellsAreReported) {
    std::vector<RunRecord> v;
    add_profile(v, 1024, -9.0);
    v.push_back(rec("lonely", 1024, 1 << 22, 1e-3, std::int64_t{1} << 30, 3.0));
    const auto t = aggregate_optima(RunSet(v));
    EXPECT_EQ(t.entries.size(), 1u);
    ASSERT_EQ(t.diagnostics.size(), 1u);
    EXPECT_THAT(t.diagnostics.front(), HasSubstr("batch_size=4194304"));
}

TEST(Aggregate, PermutationInvariantAndBounded) {
    std::vector<RunRecord> v;
    add_profile(v, 256, -9.5, 0);
    add_profile(v, 512, -9.0, 0);
    add_profile(v, 1024, -8.0, 0);
    add_profile(v, 1024, -8.5, 1);
    add_profile(v, 256, -9.0, 0, 1 << 22);
    const auto reference = aggregate_optima(RunSet(v));

    std::mt19937 rng(7);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(v.begin(), v.end(), rng);
        const auto t = aggregate_optima(RunSet(v));
        ASSERT_EQ(t.entries.size(), reference.entries.size());
        for (const auto& [key, cell] : reference.entries) {
            const auto& other = t.entries.at(key);
            EXPECT_DOUBLE_EQ(other.log2_eta_star_mean, cell.log2_eta_star_mean);
            EXPECT_DOUBLE_EQ(other.log2_eta_star_std, cell.log2_eta_star_std);
        }
    }
    const auto& c = reference.entries.at({1 << 20, std::int64_t{1} << 30});
    EXPECT_GE(c.log2_eta_star_mean, -9.5);
    EXPECT_LE(c.log2_eta_star_mean, -8.0);
}
