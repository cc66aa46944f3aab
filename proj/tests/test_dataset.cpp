#include "fixtures.hpp"
#include "ivv/dataset.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace ivv;

TEST_CASE("four-row file loads with two levels") {
    auto path = fixtures::write_temp("four.csv", "y,d,x1,z\n1.5,1,0.2,0\n2.0,0,-1,1\n0.5,1,3,1\n-1,0,0,0\n");
    CsvSchema schema;
    schema.x = {"x1"};
    auto ds = load_csv(path, schema);
    CHECK(ds.n() == 4);
    CHECK(ds.levels() == 2);
    CHECK(ds.k() == 1);
    CHECK(ds.y(1) == 2.0);
    CHECK(ds.x(2, 0) == 3.0);
    CHECK(ds.z == std::vector<int>{0, 1, 1, 0});
    CHECK_FALSE(ds.weighted);
}

TEST_CASE("non-binary treatment is rejected with the line number") {
    auto path = fixtures::write_temp("bad_d.csv", "y,d,x1,z\n1,1,0,0\n2,2,0,1\n3,0,0,1\n");
    CsvSchema schema;
    schema.x = {"x1"};
    try {
        load_csv(path, schema);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("malformed rows and bad weights are errors") {
    CsvSchema schema;
    schema.weight = "w";
    auto short_row = fixtures::write_temp("short.csv", "y,d,z,w\n1,1,0,1\n2,0\n");
    CHECK_THROWS_AS(load_csv(short_row, schema), DataError);
    auto neg = fixtures::write_temp("negw.csv", "y,d,z,w\n1,1,0,1\n2,0,1,-1\n");
    CHECK_THROWS_AS(load_csv(neg, schema), DataError);
    auto frac_z = fixtures::write_temp("fracz.csv", "y,d,z,w\n1,1,0.5,1\n2,0,1,1\n");
    CHECK_THROWS_AS(load_csv(frac_z, schema), DataError);
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", schema), DataError);
}

TEST_CASE("rows with missing values are dropped and reported") {
    auto path = fixtures::write_temp("missing.csv", "y,d,z\n1,1,0\nNA,0,1\n2,0,1\n3,,0\n4,1,1\n");
    LoadReport rep;
    auto ds = load_csv(path, CsvSchema{}, &rep);
    CHECK(ds.n() == 3);
    CHECK(rep.dropped_lines == std::vector<std::size_t>{3, 5});
}

TEST_CASE("weighted tally of the upper level equals the summed weights") {
    auto path = fixtures::write_temp("weighted.csv", "y,d,z,w\n1,1,1,2.5\n2,0,1,1.5\n3,1,0,4\n4,0,0,1\n5,1,1,3\n");
    CsvSchema schema;
    schema.weight = "w";
    auto ds = load_csv(path, schema);
    CHECK(ds.weighted);
    auto views = split_by_instrument(ds);
    REQUIRE(views.size() == 2);
    CHECK(views[1].count == doctest::Approx(7.0));
    CHECK(views[0].count == doctest::Approx(5.0));
}

TEST_CASE("balanced split gives lambda one half") {
    auto ds = fixtures::dataset({1, 2, 3, 4, 5, 6}, {0, 1, 0, 1, 0, 1}, {0, 0, 0, 1, 1, 1});
    auto views = split_by_instrument(ds);
    REQUIRE(views.size() == 2);
    CHECK(views[0].indices.size() == 3);
    CHECK(views[1].indices.size() == 3);
    CHECK(views[1].lambda == doctest::Approx(0.5));
}

TEST_CASE("single instrument level yields one view and a warning") {
    std::vector<std::string> warnings;
    Vec y(4);
    y << 1, 2, 3, 4;
    auto ds = make_dataset(y, {0, 1, 0, 1}, Mat::Zero(4, 0), {0, 0, 0, 0}, Vec(), &warnings);
    CHECK(ds.levels() == 1);
    CHECK(split_by_instrument(ds).size() == 1);
    CHECK_FALSE(warnings.empty());
}

TEST_CASE("weighted lambda by hand") {
    // z=1 weights 1, 1, 2 against a single z=0 of weight 4.
    auto ds = fixtures::dataset({1, 2, 3, 4}, {0, 1, 1, 0}, {1, 1, 1, 0}, {1, 1, 2, 4});
    auto views = split_by_instrument(ds);
    CHECK(views[1].lambda == doctest::Approx(0.5));
    auto pair = make_pair_view(ds, 0);
    CHECK(pair.lambda == doctest::Approx(0.5));
    CHECK(pair.n0 == doctest::Approx(4.0));
}

TEST_CASE("levels are recoded in ascending order of the original codes") {
    auto ds = fixtures::dataset({1, 2, 3, 4, 5, 6}, {0, 1, 0, 1, 0, 1}, {7, 3, 7, 3, 12, 12});
    CHECK(ds.z_codes == std::vector<long long>{3, 7, 12});
    CHECK(ds.z == std::vector<int>{1, 0, 1, 0, 2, 2});
}

TEST_CASE("views partition the index set") {
    Rng rng(20240611);
    std::uniform_int_distribution<int> size(2, 60), levels(1, 4), bit(0, 1);
    std::uniform_real_distribution<double> unif(0.1, 3.0);
    for (int rep = 0; rep < 1000; ++rep) {
        int n = size(rng), K = levels(rng);
        std::uniform_int_distribution<int> lev(0, K - 1);
        Vec y(n), w(n);
        std::vector<int> d(n);
        std::vector<double> z(n);
        for (int i = 0; i < n; ++i) {
            y(i) = unif(rng);
            w(i) = unif(rng);
            d[i] = bit(rng);
            z[i] = 2.0 * lev(rng);
        }
        auto ds = make_dataset(y, d, Mat::Zero(n, 0), z, w);
        auto views = split_by_instrument(ds);
        std::vector<std::size_t> all;
        double lambda_sum = 0.0;
        for (const auto& v : views) {
            CHECK(std::is_sorted(v.indices.begin(), v.indices.end()));
            double tally = 0.0;
            for (auto i : v.indices) {
                tally += w(static_cast<Eigen::Index>(i));
                CHECK(ds.z[i] == v.level);
            }
            CHECK(v.count == doctest::Approx(tally));
            lambda_sum += v.lambda;
            if (views.size() > 1) CHECK((v.lambda > 0.0 && v.lambda < 1.0));
            all.insert(all.end(), v.indices.begin(), v.indices.end());
        }
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expect(n);
        std::iota(expect.begin(), expect.end(), 0);
        REQUIRE(all == expect);
        CHECK(lambda_sum == doctest::Approx(1.0));
    }
}

TEST_CASE("selected columns load with listwise deletion") {
    auto path = fixtures::write_temp("cols.csv", "a,b,c\n1,2,3\n4,,6\n7,8,9\n");
    LoadReport rep;
    auto m = load_columns(path, {"c", "a"}, &rep);
    REQUIRE(m.rows() == 3);
    CHECK(m(1, 0) == 6.0);
    CHECK(m(2, 1) == 7.0);
    auto m2 = load_columns(path, {"b"}, &rep);
    CHECK(m2.rows() == 2);
}
