#include <doctest.h>

#include <random>
#include <set>

#include "aggmrf/encodings.hpp"
#include "test_paths.hpp"

using namespace aggmrf;

namespace {

Dataset with_rates(const std::vector<std::pair<int, int>>& counts_positives, Modality cardinality) {
    Dataset ds{Schema({{"f", cardinality}, {"g", 2}})};
    for (Modality m = 0; m < counts_positives.size(); ++m) {
        const auto [count, positives] = counts_positives[m];
        for (int i = 0; i < count; ++i) {
            const Modality x[2] = {m, static_cast<Modality>(i % 2)};
            ds.add(x, i < positives ? 1 : 0);
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("fitted statistics are the per-modality counts") {
    std::mt19937_64 rng(1);
    Dataset ds{Schema({{"f", 30}, {"g", 2}})};
    std::vector<double> occ(30, 0), pos(30, 0);
    for (int i = 0; i < 2000; ++i) {
        const Modality x[2] = {static_cast<Modality>(rng() % 25), static_cast<Modality>(rng() % 2)};
        const int y = static_cast<int>(rng() % 3 == 0);
        ds.add(x, y);
        occ[x[0]] += 1;
        pos[x[0]] += y;
    }
    const auto e = fit_target_encoding(ds, 0, 4, 5, 10);
    CHECK(e.occurrences == occ);
    CHECK(e.positives == pos);
    const double ybar = ds.positive_rate();
    for (Modality m = 0; m < 25; ++m) CHECK(e.rate[m] == doctest::Approx((pos[m] + 10 * ybar) / (occ[m] + 10)));
    CHECK(e.cardinality() == 21);
    for (Modality m = 0; m < 30; ++m) CHECK(e.map[m] < e.cardinality());
    for (Modality m = 25; m < 30; ++m) CHECK(e.map[m] == e.reserved());
    for (Modality m = 0; m < 25; ++m) CHECK(e.map[m] != e.reserved());
}

TEST_CASE("degenerate encodings") {
    const Dataset same = with_rates({{10, 5}, {10, 5}, {10, 5}, {10, 5}}, 4);
    const auto e = fit_target_encoding(same, 0, 3, 3);
    std::set<Modality> used(e.map.begin(), e.map.end());
    CHECK(used.size() == 1);

    const auto one = fit_target_encoding(same, 0, 1, 1);
    CHECK(one.cardinality() == 2);
    const auto applied = apply_encodings(same, std::span(&one, 1));
    CHECK(applied.schema().cardinality(0) == 2);
    for (std::size_t i = 0; i < applied.size(); ++i) CHECK(applied.x(i)[0] == 0);

    CHECK_THROWS_AS(fit_target_encoding(Dataset{same.schema()}, 0, 2, 2), Error);
    CHECK_THROWS_AS(fit_target_encoding(same, 0, 0, 2), Error);
}

TEST_CASE("rate bins separate high and low groups") {
    std::vector<std::pair<int, int>> stats;
    for (int m = 0; m < 10; ++m) stats.push_back({100, m < 5 ? 90 : 10});
    const Dataset ds = with_rates(stats, 10);
    const auto e = fit_target_encoding(ds, 0, 1, 2);
    for (Modality m = 1; m < 5; ++m) CHECK(e.map[m] == e.map[0]);
    for (Modality m = 6; m < 10; ++m) CHECK(e.map[m] == e.map[5]);
    CHECK(e.map[0] != e.map[5]);
}

TEST_CASE("applying encodings") {
    std::vector<std::pair<int, int>> stats;
    for (int m = 0; m < 6; ++m) stats.push_back({10 + 5 * m, m});
    const Dataset ds = with_rates(stats, 6);

    TargetEncoding id;
    id.feature = 0;
    id.name = "f";
    id.count_bins = 6;
    id.ctr_bins = 1;
    id.map = {5, 4, 3, 2, 1, 0};
    const auto relabeled = apply_encodings(ds, std::span(&id, 1));
    CHECK(relabeled.schema().cardinality(0) == 7);
    CHECK(relabeled.schema().cardinality(1) == 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(relabeled.x(i)[0] == 5 - ds.x(i)[0]);
        CHECK(relabeled.x(i)[1] == ds.x(i)[1]);
        CHECK(relabeled.y(i) == ds.y(i));
    }

    const auto fitted = fit_target_encoding(ds, 0, 2, 2);
    const Dataset other = with_rates({{3, 1}, {0, 0}, {4, 4}}, 6);
    CHECK(apply_encodings(ds, std::span(&fitted, 1)).schema() ==
          apply_encodings(other, std::span(&fitted, 1)).schema());

    TargetEncoding bad = fitted;
    bad.feature = 9;
    CHECK_THROWS_AS(apply_encodings(ds, std::span(&bad, 1)), Error);
}

TEST_CASE("encoding file round trip") {
    TempDir tmp;
    std::vector<std::pair<int, int>> stats;
    for (int m = 0; m < 8; ++m) stats.push_back({5 + m, m % 3});
    const Dataset ds = with_rates(stats, 9);
    const std::vector<TargetEncoding> enc{fit_target_encoding(ds, 0, 2, 3), fit_target_encoding(ds, 1, 1, 2)};
    save_encodings(enc, tmp / "enc.txt");
    const auto back = load_encodings(tmp / "enc.txt", ds.schema());
    REQUIRE(back.size() == 2);
    for (int k = 0; k < 2; ++k) {
        CHECK(back[k].feature == enc[k].feature);
        CHECK(back[k].map == enc[k].map);
        CHECK(back[k].occurrences == enc[k].occurrences);
        CHECK(back[k].positives == enc[k].positives);
        CHECK(back[k].cardinality() == enc[k].cardinality());
    }
    CHECK(apply_encodings(ds, back) == apply_encodings(ds, enc));
    CHECK_THROWS_AS(load_encodings(tmp / "enc.txt", Schema({{"other", 3}})), Error);
}
