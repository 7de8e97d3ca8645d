#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "aggmrf/schema.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

using namespace aggmrf;

TEST_CASE("toy CSV loads with first-seen modality order") {
    CsvOptions opt;
    opt.label_column = "label";
    opt.reserve_unseen = false;
    const auto loaded = load_csv(test_data("toy.csv"), opt);
    const Dataset& ds = loaded.dataset;
    CHECK(ds.size() == 5);
    CHECK(ds.dims() == 3);
    for (std::size_t d = 0; d < 3; ++d) CHECK(ds.schema().cardinality(d) == 2);
    CHECK(ds == oracle::toy_table());
}

TEST_CASE("reserved unseen modality") {
    CsvOptions opt;
    opt.label_column = "label";
    const auto loaded = load_csv(test_data("toy.csv"), opt);
    for (std::size_t d = 0; d < 3; ++d) CHECK(loaded.dataset.schema().cardinality(d) == 3);
    CHECK(loaded.codec.encode_cell(1, "C") == 2);
    CHECK(loaded.codec.encode_cell(1, "A") == 1);

    TempDir tmp;
    std::ofstream(tmp / "one.csv") << "f,y\nA,1\n";
    opt.label_column = "y";
    const auto one = load_csv(tmp / "one.csv", opt);
    CHECK(one.dataset.size() == 1);
    CHECK(one.dataset.schema().cardinality(0) == 2);
}

TEST_CASE("CSV errors") {
    TempDir tmp;
    CsvOptions opt;
    opt.label_column = "y";
    std::ofstream(tmp / "empty.csv") << "f,y\n";
    CHECK_THROWS_WITH_AS(load_csv(tmp / "empty.csv", opt), doctest::Contains("empty dataset"), Error);
    std::ofstream(tmp / "nolabel.csv") << "f,g\nA,1\n";
    CHECK_THROWS_AS(load_csv(tmp / "nolabel.csv", opt), Error);
    std::ofstream(tmp / "badlabel.csv") << "f,y\nA,1\nB,2\n";
    CHECK_THROWS_WITH_AS(load_csv(tmp / "badlabel.csv", opt), doctest::Contains("non-binary label"), Error);
    std::ofstream(tmp / "yes.csv") << "f,y\nA,yes\n";
    CHECK_THROWS_AS(load_csv(tmp / "yes.csv", opt), Error);
}

TEST_CASE("decile cut points of 1..100") {
    std::vector<double> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i + 1;
    std::shuffle(v.begin(), v.end(), std::mt19937_64(3));
    const auto plan = fit_discretization(v, 10);
    // Linear interpolation at h = 99k/10 over the sorted sequence 1..100.
    REQUIRE(plan.cuts.size() == 9);
    for (int k = 1; k <= 9; ++k) CHECK(plan.cuts[k - 1] == doctest::Approx(1 + 99.0 * k / 10).epsilon(1e-12));
    CHECK(plan.cuts[0] == doctest::Approx(10.9));
    CHECK(plan.cuts[1] == doctest::Approx(20.8));
    CHECK(plan.apply(5) == 0);
    CHECK(plan.apply(95) == 9);
    CHECK(plan.apply(10.9) == 0);
    CHECK(plan.apply(10.91) == 1);
}

TEST_CASE("degenerate discretizations") {
    const std::vector<double> constant(50, 4.2);
    const auto c = fit_discretization(constant, 10);
    CHECK(c.cuts.empty());
    CHECK(c.apply(-1e9) == 0);
    CHECK(c.apply(1e9) == 0);
    const std::vector<double> v{1, 2, 3};
    CHECK(fit_discretization(v, 1).cuts.empty());
}

TEST_CASE("discretization is monotone") {
    std::mt19937_64 rng(11);
    std::lognormal_distribution<double> g(0, 2);
    std::vector<double> v(1000);
    for (auto& x : v) x = std::floor(g(rng));
    const auto plan = fit_discretization(v, 10);
    CHECK(std::is_sorted(plan.cuts.begin(), plan.cuts.end()));
    CHECK(std::adjacent_find(plan.cuts.begin(), plan.cuts.end()) == plan.cuts.end());
    std::vector<double> probe(v);
    std::sort(probe.begin(), probe.end());
    for (std::size_t i = 1; i < probe.size(); ++i) CHECK(plan.apply(probe[i - 1]) <= plan.apply(probe[i]));
}

TEST_CASE("split sizes, determinism and partition") {
    Dataset ds{Schema({{"id", 10}})};
    for (Modality i = 0; i < 10; ++i) ds.add(std::span<const Modality>(&i, 1), static_cast<int>(i % 2));
    const auto a = split_dataset(ds, {0.6, 0.2, 0.2}, 7);
    CHECK(a[0].size() == 6);
    CHECK(a[1].size() == 2);
    CHECK(a[2].size() == 2);
    const auto b = split_dataset(ds, {0.6, 0.2, 0.2}, 7);
    for (int k = 0; k < 3; ++k) CHECK(a[k] == b[k]);

    std::vector<Modality> seen;
    for (const auto& part : a)
        for (std::size_t i = 0; i < part.size(); ++i) seen.push_back(part.x(i)[0]);
    std::sort(seen.begin(), seen.end());
    for (Modality i = 0; i < 10; ++i) CHECK(seen[i] == i);

    CHECK_THROWS_WITH_AS(split_dataset(ds, {1.0, 0.0, 0.0}, 7), doctest::Contains("fraction <= 0"), Error);
}

TEST_CASE("codec round trip through raw CSV") {
    TempDir tmp;
    std::mt19937_64 rng(5);
    {
        std::ofstream f(tmp / "raw.csv");
        f << "color,size,weight,y\n";
        const char* colors[] = {"red", "green", "blue", "teal"};
        std::normal_distribution<double> w(70, 12);
        for (int i = 0; i < 400; ++i)
            f << colors[rng() % 4] << ',' << (rng() % 3) << ',' << w(rng) << ',' << (rng() & 1) << '\n';
    }
    CsvOptions opt;
    opt.label_column = "y";
    opt.continuous_columns = {"weight"};
    const auto loaded = load_csv(tmp / "raw.csv", opt);
    CHECK(loaded.dataset.schema().cardinality(2) == 11);

    loaded.codec.save(tmp / "codec.txt");
    const auto codec = CsvCodec::load(tmp / "codec.txt");
    CHECK(load_csv(tmp / "raw.csv", codec) == loaded.dataset);

    {
        std::ofstream f(tmp / "decoded.csv");
        f << "color,size,weight,y\n";
        for (std::size_t i = 0; i < loaded.dataset.size(); ++i) {
            for (const auto& cell : codec.decode(loaded.dataset.x(i))) f << cell << ',';
            f << loaded.dataset.y(i) << '\n';
        }
    }
    CHECK(load_csv(tmp / "decoded.csv", codec) == loaded.dataset);

    write_dataset_csv(loaded.dataset, tmp / "dump.csv");
    CHECK(read_dataset_csv(tmp / "dump.csv", loaded.dataset.schema()) == loaded.dataset);
}

TEST_CASE("schema validation") {
    CHECK_THROWS_AS(Schema({{"a", 0}}), Error);
    CHECK_THROWS_AS(Schema({{"a", 2}, {"a", 3}}), Error);
    Dataset ds{Schema({{"a", 2}})};
    const Modality bad = 2;
    CHECK_THROWS_AS(ds.add(std::span<const Modality>(&bad, 1), 0), Error);
    const Modality ok = 1;
    CHECK_THROWS_AS(ds.add(std::span<const Modality>(&ok, 1), 2), Error);
}
