#include "doctest.h"

#include "harmony/error.hpp"
#include "harmony/tabular.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace harmony;
namespace fs = std::filesystem;

namespace {

Schema basic_schema()
{
    Schema s;
    s.site_col = "site";
    s.target_col = "y";
    s.feature_cols = {"f*"};
    return s;
}

fs::path write_temp(const std::string& name, const std::string& text)
{
    const fs::path p = fs::temp_directory_path() / ("harmony_tabular_" + name);
    std::ofstream(p) << text;
    return p;
}

std::string error_of(auto&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("load_dataset maps columns by role")
{
    const auto p = write_temp("four.csv", "site,f1,y,f2\nA,1.0,F,2\nA,1.5,M,3\nB,2,M,4\nB,2.5,F,5\n");
    const Dataset d = load_dataset(p, basic_schema());
    CHECK(d.rows() == 4);
    CHECK(d.n_features() == 2);
    CHECK(d.sites == std::vector<std::string>{"A", "A", "B", "B"});
    CHECK(d.feature_names == std::vector<std::string>{"f1", "f2"});
    CHECK(d.features(1, 0) == 1.5);
    CHECK(d.features(3, 1) == 5.0);
    CHECK(d.task.classes() == std::vector<std::string>{"F", "M"});
    CHECK(d.target_label(0) == "F");
    CHECK(d.target[1] == 1.0);
    CHECK(d.covariates.cols() == 0);
}

TEST_CASE("load_dataset errors")
{
    SUBCASE("header only")
    {
        const auto p = write_temp("header.csv", "site,f1,y\n");
        CHECK(error_of([&] { load_dataset(p, basic_schema()); }) == "empty dataset");
    }
    SUBCASE("site with one row is named")
    {
        const auto p = write_temp("single.csv", "site,f1,y\nA,1,F\nA,2,M\nB,3,M\n");
        CHECK_THROWS_AS(load_dataset(p, basic_schema()), DataError);
        CHECK(error_of([&] { load_dataset(p, basic_schema()); }).find("'B'") != std::string::npos);
    }
    SUBCASE("missing column is a schema error")
    {
        const auto p = write_temp("nocol.csv", "site,f1\nA,1\nA,2\n");
        CHECK_THROWS_AS(load_dataset(p, basic_schema()), ConfigError);
    }
    SUBCASE("non-numeric feature cell names row and column")
    {
        const auto p = write_temp("bad.csv", "site,f1,y\nA,1,F\nA,abc,M\nB,3,M\nB,4,F\n");
        const auto msg = error_of([&] { load_dataset(p, basic_schema()); });
        CHECK(msg.find("f1") != std::string::npos);
        CHECK(msg.find("row 2") != std::string::npos);
    }
    SUBCASE("missing cell is rejected, not imputed")
    {
        const auto p = write_temp("gap.csv", "site,f1,y\nA,1,F\nA,,M\nB,3,M\nB,4,F\n");
        CHECK_THROWS_AS(load_dataset(p, basic_schema()), DataError);
    }
    SUBCASE("single class")
    {
        const auto p = write_temp("oneclass.csv", "site,f1,y\nA,1,F\nA,2,F\nB,3,F\nB,4,F\n");
        CHECK_THROWS_AS(load_dataset(p, basic_schema()), DataError);
    }
}

TEST_CASE("csv parsing handles quotes, CRLF and BOM")
{
    const auto t = parse_csv("\xEF\xBB\xBFsite,\"f,1\",y\r\n\"A\",1,\"x\"\"y\"\r\n\r\nB,2,z\r\n");
    CHECK(t.header == std::vector<std::string>{"site", "f,1", "y"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][2] == "x\"y");
}

TEST_CASE("csv round trip through dataset_to_table")
{
    const auto p = write_temp("rt.csv", "site,f1,y,age\nA,1.25,F,30\nA,1.5,M,31\nB,2,M,40\nB,2.5,F,41\n");
    Schema s = basic_schema();
    s.covariate_cols = {"age"};
    const Dataset d = load_dataset(p, s);
    const CsvTable t = dataset_to_table(d, true);
    CHECK(t.header == std::vector<std::string>{"id", "site", "target", "f1", "age"});
    const auto out = fs::temp_directory_path() / "harmony_tabular_rt_out.csv";
    write_csv(out, t);
    Schema s2;
    s2.site_col = "site";
    s2.target_col = "target";
    s2.feature_cols = {"f1"};
    s2.covariate_cols = {"age"};
    const Dataset back = load_dataset(out, s2);
    CHECK(back.features == d.features);
    CHECK(back.covariates == d.covariates);
    CHECK(back.target == d.target);
}

TEST_CASE("encode_target_covariate")
{
    const TaskKind binary = TaskKind::classification({"M", "F", "M"});
    CHECK(binary.classes() == std::vector<std::string>{"F", "M"});
    const std::vector<std::string> fm{"F", "M", "M"};
    CHECK(encode_target_labels(fm, binary) == Eigen::MatrixXd{{0}, {1}, {1}});

    const Eigen::VectorXd ages{{22, 31}};
    CHECK(encode_target_covariate(ages, TaskKind::regression()) == Eigen::MatrixXd{{22}, {31}});

    const TaskKind three = TaskKind::classification({"c", "a", "b"});
    const std::vector<std::string> abca{"a", "b", "c", "a"};
    CHECK(encode_target_labels(abca, three) == Eigen::MatrixXd{{0, 0}, {1, 0}, {0, 1}, {0, 0}});
    CHECK(target_covariate_width(three) == 2);

    const std::vector<std::string> unseen{"a", "q"};
    const auto msg = error_of([&] { encode_target_labels(unseen, three); });
    CHECK(msg.find("'q'") != std::string::npos);
    CHECK(msg.find("a, b, c") != std::string::npos);
}

TEST_CASE("make_folds examples")
{
    const std::vector<int> none;
    const FoldPlan plan = make_folds(10, none, 5, 1, 42);
    REQUIRE(plan.splits.size() == 5);
    for (const auto& s : plan.splits) {
        CHECK(s.test.size() == 2);
        CHECK(s.train.size() == 8);
    }

    std::vector<int> classes(100);
    for (int i = 0; i < 100; ++i)
        classes[static_cast<std::size_t>(i)] = i < 50 ? 0 : 1;
    const FoldPlan strat = make_folds(100, classes, 5, 1, 7);
    for (const auto& s : strat.splits) {
        int c1 = 0;
        for (int r : s.test)
            c1 += classes[static_cast<std::size_t>(r)];
        CHECK(s.test.size() == 20);
        CHECK(c1 == 10);
    }

    const FoldPlan again = make_folds(100, classes, 5, 1, 7);
    for (std::size_t i = 0; i < strat.splits.size(); ++i) {
        CHECK(strat.splits[i].train == again.splits[i].train);
        CHECK(strat.splits[i].test == again.splits[i].test);
    }
}

TEST_CASE("make_folds invariants over many configurations")
{
    for (int n : {7, 10, 33, 101}) {
        for (int k : {2, 3, 5}) {
            for (std::uint64_t seed : {1u, 2u, 99u}) {
                std::vector<int> strata(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i)
                    strata[static_cast<std::size_t>(i)] = (i * 7 + 3) % 3 == 0 ? 1 : 0;
                const FoldPlan plan = make_folds(n, strata, k, 3, seed);
                REQUIRE(plan.splits.size() == static_cast<std::size_t>(k * 3));
                for (int rep = 0; rep < 3; ++rep) {
                    std::vector<int> seen(static_cast<std::size_t>(n), 0);
                    for (const auto& s : plan.splits) {
                        if (s.repeat != rep)
                            continue;
                        std::set<int> tr(s.train.begin(), s.train.end());
                        for (int r : s.test) {
                            CHECK(tr.count(r) == 0);
                            ++seen[static_cast<std::size_t>(r)];
                        }
                        CHECK(s.train.size() + s.test.size() == static_cast<std::size_t>(n));
                        // Per-fold class counts within one sample of the exact share.
                        int c1 = 0, total1 = 0;
                        for (int r : s.test)
                            c1 += strata[static_cast<std::size_t>(r)];
                        for (int v : strata)
                            total1 += v;
                        CHECK(std::abs(c1 * k - total1) <= k);
                    }
                    for (int v : seen)
                        CHECK(v == 1);
                }
            }
        }
    }
}

TEST_CASE("make_folds errors")
{
    const std::vector<int> none;
    CHECK_THROWS_AS(make_folds(10, none, 1, 1, 0), ConfigError);
    CHECK_THROWS_AS(make_folds(3, none, 5, 1, 0), Error);

    Dataset d;
    d.features = Eigen::MatrixXd::Zero(12, 1);
    for (int i = 0; i < 12; ++i)
        d.sites.push_back(i % 2 ? "A" : "B");
    d.task = TaskKind::classification({"x", "y"});
    d.target = Eigen::VectorXd::Zero(12);
    d.target.head(3).setOnes();
    d.covariates.resize(12, 0);
    CHECK_THROWS_AS(make_folds(d, 5, 1, true, 0), DataError);
    CHECK_NOTHROW(make_folds(d, 3, 1, true, 0));
}
