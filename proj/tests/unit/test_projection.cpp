#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "aggmrf/projection.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

using namespace aggmrf;

namespace {

Schema toy_schema() { return oracle::toy_table().schema(); }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("table counts and row space size") {
    const auto pairs = ProjectionSet::build_pairwise(toy_schema(), false);
    CHECK(pairs.num_tables() == 3);
    CHECK(pairs.size() == 12);
    CHECK(ProjectionSet::build_pairwise(toy_schema(), true).size() == 18);
    CHECK(ProjectionSet::build_single(toy_schema()).size() == 6);

    const Schema one({{"a", 5}});
    const auto s1 = ProjectionSet::build_pairwise(one, true);
    CHECK(s1.num_tables() == 1);
    CHECK(s1.size() == 5);
    CHECK_THROWS_AS(ProjectionSet::build_pairwise(one, false), Error);
    CHECK(ProjectionSet::build_single(one).size() == 5);

    std::vector<Feature> twenty;
    for (int d = 0; d < 20; ++d) twenty.push_back({"f" + std::to_string(d), 10});
    const auto big = ProjectionSet::build_pairwise(Schema(twenty), false);
    CHECK(big.num_tables() == 190);
    CHECK(big.size() == 19000);
}

TEST_CASE("constant feature has one always-active row") {
    const auto ps = ProjectionSet::build_single(Schema({{"c", 1}, {"b", 2}}));
    const Modality x[2] = {0, 1};
    const auto enc = ps.encode(x);
    CHECK(enc.size() == 2);
    CHECK(enc[0].row == 0);
    CHECK(enc[1].row == 2);
}

TEST_CASE("toy aggregation against a literal recount of the records") {
    const Dataset ds = oracle::toy_table();
    const auto ps = ProjectionSet::build_pairwise(ds.schema(), false);
    const auto agg = aggregate(ps, ds);
    const auto [d, c] = oracle::aggregates(ds, oracle::table_subsets(3, false, true));
    CHECK(agg.n == 5);
    CHECK(agg.d == d);
    CHECK(agg.c == c);

    // Cells of the published aggregate table that agree with the records.
    CHECK(agg.d[1] == 1);   // F1="1", F2=A
    CHECK(agg.c[1] == 0);
    CHECK(agg.d[3] == 1);   // F1="2", F2=A
    CHECK(agg.c[3] == 1);
    CHECK(agg.d[4] == 1);   // F1="1", F3=a
    CHECK(agg.c[4] == 1);
    CHECK(agg.d[5] == 2);   // F1="1", F3=b
    CHECK(agg.c[5] == 0);
    CHECK(agg.d[7] == 1);   // F1="2", F3=b
    CHECK(agg.c[7] == 1);
    CHECK(agg.d[8] == 2);   // F2=B, F3=a
    CHECK(agg.c[8] == 2);
    CHECK(agg.d[9] == 1);   // F2=B, F3=b
    CHECK(agg.c[9] == 0);
    CHECK(agg.d[10] == 0);  // F2=A, F3=a: omitted from the published table
    CHECK(agg.d[11] == 2);  // F2=A, F3=b
    CHECK(agg.c[11] == 1);

    // Recounted from the five records: examples 1 and 3, example 4, example 4.
    CHECK(agg.d[0] == 2);
    CHECK(agg.c[0] == 1);
    CHECK(agg.d[2] == 1);
    CHECK(agg.c[2] == 1);
    CHECK(agg.d[6] == 1);
    CHECK(agg.c[6] == 1);
}

TEST_CASE("encode matches the dense projection vector") {
    std::mt19937_64 rng(21);
    const Schema s({{"a", 3}, {"b", 2}, {"c", 4}, {"d", 1}});
    for (bool singles : {false, true}) {
        const auto ps = ProjectionSet::build_pairwise(s, singles);
        const auto subsets = oracle::table_subsets(4, singles, true);
        const Dataset ds = oracle::random_dataset(s, 50, rng);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto phi = oracle::dense_phi(s, subsets, ds.x(i));
            std::vector<double> from_enc(ps.size(), 0.0);
            for (const auto& r : ps.encode(ds.x(i))) from_enc[r.row] += r.multiplicity;
            CHECK(from_enc == phi);
        }
    }
    const Modality x[3] = {0, 0, 0};
    const auto enc = ProjectionSet::build_pairwise(toy_schema(), false).encode(x);
    REQUIRE(enc.size() == 3);
    CHECK(enc[0].row == 0);
    CHECK(enc[1].row == 4);
    CHECK(enc[2].row == 8);
    const Modality oob[3] = {0, 2, 0};
    CHECK_THROWS_AS(ProjectionSet::build_pairwise(toy_schema(), false).encode(oob), Error);

    const auto single = ProjectionSet::build_single(Schema({{"a", 5}}));
    const Modality three = 3;
    const auto e = single.encode(std::span<const Modality>(&three, 1));
    REQUIRE(e.size() == 1);
    CHECK(e[0].row == 3);
    CHECK(e[0].multiplicity == 1);
}

TEST_CASE("aggregation is linear and respects table sums") {
    std::mt19937_64 rng(8);
    const Schema s({{"a", 3}, {"b", 4}, {"c", 2}});
    const auto ps = ProjectionSet::build_pairwise(s, true);
    const Dataset a = oracle::random_dataset(s, 40, rng);
    const Dataset b = oracle::random_dataset(s, 25, rng);
    const auto ab = aggregate(ps, concat(a, b));
    const auto aa = aggregate(ps, a);
    const auto bb = aggregate(ps, b);
    for (std::size_t k = 0; k < ps.size(); ++k) {
        CHECK(ab.d[k] == aa.d[k] + bb.d[k]);
        CHECK(ab.c[k] == aa.c[k] + bb.c[k]);
        CHECK(ab.c[k] <= ab.d[k]);
    }
    const auto twice = aggregate(ps, concat(a, a));
    for (std::size_t k = 0; k < ps.size(); ++k) CHECK(twice.d[k] == 2 * aa.d[k]);
    CHECK_NOTHROW(check_aggregates(ps, ab));

    const auto empty = aggregate(ps, Dataset{s});
    CHECK(empty.n == 0);
    for (double v : empty.d) CHECK(v == 0);
}

TEST_CASE("hashed projection commutes with aggregation") {
    std::mt19937_64 rng(13);
    const Dataset ds = oracle::toy_table();
    const auto base = ProjectionSet::build_pairwise(ds.schema(), true);
    const auto base_agg = aggregate(base, ds);
    for (std::size_t buckets : {1u, 5u, 64u}) {
        const auto hashed = ProjectionSet::build_hashed(base, buckets, 99);
        CHECK(hashed.size() == buckets);
        const auto direct = aggregate(hashed, ds);
        CHECK(direct == push_through_buckets(hashed, base_agg));

        const auto subsets = oracle::table_subsets(3, true, true);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto phi = oracle::hashed_phi(oracle::dense_phi(ds.schema(), subsets, ds.x(i)),
                                                hashed.bucket_map(), buckets);
            std::vector<double> from_enc(buckets, 0.0);
            double total = 0;
            for (const auto& r : hashed.encode(ds.x(i))) {
                from_enc[r.row] += r.multiplicity;
                total += r.multiplicity;
            }
            CHECK(from_enc == phi);
            CHECK(total == base.num_tables());
        }
    }
    const auto one = ProjectionSet::build_hashed(base, 1, 3);
    CHECK(aggregate(one, ds).d[0] == 5.0 * base.num_tables());

    // An injective bucket map relabels the base aggregates.
    std::uint64_t seed = 0;
    for (;; ++seed) {
        const auto h = ProjectionSet::build_hashed(base, 4 * base.size(), seed);
        std::vector<int> hits(h.size(), 0);
        bool injective = true;
        for (auto b : h.bucket_map()) injective = injective && hits[b]++ == 0;
        if (!injective) continue;
        const auto agg = aggregate(h, ds);
        for (std::size_t k = 0; k < base.size(); ++k) {
            CHECK(agg.d[h.bucket_map()[k]] == base_agg.d[k]);
            CHECK(agg.c[h.bucket_map()[k]] == base_agg.c[k]);
        }
        break;
    }
}

TEST_CASE("tables file round trip and errors") {
    TempDir tmp;
    const Dataset ds = oracle::toy_table();
    for (bool singles : {false, true}) {
        const auto ps = ProjectionSet::build_pairwise(ds.schema(), singles);
        const auto agg = aggregate(ps, ds);
        write_tables(agg, ps, tmp / "t.txt");
        const auto [agg2, ps2] = read_tables(tmp / "t.txt");
        CHECK(agg2 == agg);
        CHECK(ps2.fingerprint() == ps.fingerprint());
        CHECK(ps2.schema() == ps.schema());
    }
    const auto single = ProjectionSet::build_single(ds.schema());
    write_tables(aggregate(single, ds), single, tmp / "s.txt");
    CHECK(read_tables(tmp / "s.txt").second.fingerprint() == single.fingerprint());

    const auto hashed = ProjectionSet::build_hashed(ProjectionSet::build_pairwise(ds.schema(), true), 7, 5);
    write_tables(aggregate(hashed, ds), hashed, tmp / "h.txt");
    const auto [hagg, hps] = read_tables(tmp / "h.txt");
    CHECK(hps.fingerprint() == hashed.fingerprint());
    CHECK(hagg == aggregate(hashed, ds));

    const auto ps = ProjectionSet::build_pairwise(ds.schema(), false);
    write_tables(aggregate(ps, ds), ps, tmp / "t.txt");
    const std::string text = slurp(tmp / "t.txt");
    CHECK(text.starts_with("aggdata v1 n=5 tables=3\ntable F1,F2 rows=4\n0,0 2 1\n"));

    std::string bad_c = text;
    bad_c.replace(bad_c.find("0,0 2 1"), 7, "0,0 2 3");
    std::ofstream(tmp / "badc.txt") << bad_c;
    CHECK_THROWS_AS(read_tables(tmp / "badc.txt"), Error);

    const auto cut = text.rfind("table ");
    std::ofstream(tmp / "short.txt") << text.substr(0, cut);
    CHECK_THROWS_WITH_AS(read_tables(tmp / "short.txt"), doctest::Contains("table count mismatch"), Error);

    std::ofstream(tmp / "junk.txt") << "hello\n";
    CHECK_THROWS_AS(read_tables(tmp / "junk.txt"), Error);
}

TEST_CASE("aggregate checks") {
    const auto ps = ProjectionSet::build_single(toy_schema());
    AggregatedData agg{std::vector<double>(6, 0.0), std::vector<double>(6, 0.0), 1};
    agg.d[0] = agg.d[2] = agg.d[4] = 1;
    CHECK_NOTHROW(check_aggregates(ps, agg));
    agg.c[1] = 1;
    CHECK_THROWS_AS(check_aggregates(ps, agg), Error);
    agg.c[1] = 0;
    agg.d[5] = 1;
    CHECK_THROWS_AS(check_aggregates(ps, agg), Error);
}

TEST_CASE("feature marginals from tables") {
    const Dataset ds = oracle::toy_table();
    const auto ps = ProjectionSet::build_pairwise(ds.schema(), false);
    const auto agg = aggregate(ps, ds);
    const auto m0 = feature_marginal(ps, agg, 0);
    CHECK(m0 == std::vector<double>{3, 2});
    const auto m2 = feature_marginal(ps, agg, 2);
    CHECK(m2 == std::vector<double>{2, 3});
    const auto hashed = ProjectionSet::build_hashed(ps, 4, 1);
    CHECK_THROWS_AS(feature_marginal(hashed, aggregate(hashed, ds), 0), Error);
}
