#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <set>

#include "stbd/dataset.hpp"

using namespace stbd;

namespace {
struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/stbd_test_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};
}  // namespace

TEST_CASE("csv reads header and rows") {
    TempFile f("basic.csv", "a,b,c\n1,2,3\n4,5,6\n");
    csv::Table t = csv::read_file(f.path);
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    REQUIRE(t.column("b") == 1);
    REQUIRE(t.column("missing") == -1);
}

TEST_CASE("csv rejects ragged rows and bad numbers") {
    TempFile f("ragged.csv", "a,b\n1,2\n3\n");
    REQUIRE_THROWS_WITH(csv::read_file(f.path), Catch::Matchers::ContainsSubstring("line 3"));
    REQUIRE_THROWS_WITH(csv::parse_double("1.2x", "ctx"),
                        Catch::Matchers::ContainsSubstring("ctx"));
    REQUIRE_THROWS(csv::parse_long("3.5", "ctx"));
    REQUIRE(csv::parse_double("-1e-3", "ctx") == -1e-3);
    REQUIRE(csv::parse_long("42", "ctx") == 42);
}

TEST_CASE("csv trailing empty field and CRLF") {
    TempFile f("crlf.csv", "a,b\r\n1,\r\n");
    csv::Table t = csv::read_file(f.path);
    REQUIRE(t.rows[0][1].empty());
}

static const char* kSmallData =
    "location_id,lat,lon,time_index,response,size\n"
    "L1,51.5,-0.1,3,10.0,1.5\n"
    "L1,51.5,-0.1,7,11.0,2.5\n"
    "L2,51.6,-0.2,3,12.0,3.5\n"
    "L2,51.6,-0.2,9,13.0,4.5\n"
    "L1,51.5,-0.1,3,10.5,1.0\n";

TEST_CASE("load_dataset compacts time indices preserving order") {
    TempFile f("load.csv", kSmallData);
    Dataset ds = load_dataset(f.path);
    REQUIRE(ds.S() == 2);
    REQUIRE(ds.T == 3);  // raw times {3,7,9} -> {0,1,2}
    REQUIRE(ds.N() == 5);
    REQUIRE(ds.covariate_names == std::vector<std::string>{"size"});
    REQUIRE(ds.observations[0].time_index == 0);
    REQUIRE(ds.observations[1].time_index == 1);
    REQUIRE(ds.observations[3].time_index == 2);
    REQUIRE(ds.observations[4].time_index == 0);  // replicate in same cell
    REQUIRE(ds.observations[4].location_index == 0);
}

TEST_CASE("load_dataset rejects conflicting duplicate locations") {
    TempFile f("dup.csv",
               "location_id,lat,lon,time_index,response\n"
               "L1,51.5,-0.1,0,1.0\n"
               "L1,51.6,-0.1,1,2.0\n");
    REQUIRE_THROWS_WITH(load_dataset(f.path),
                        Catch::Matchers::ContainsSubstring("conflicting coordinates"));
}

TEST_CASE("load_dataset rejects out-of-range coordinates and non-finite values") {
    TempFile f("range.csv",
               "location_id,lat,lon,time_index,response\n"
               "L1,99.0,-0.1,0,1.0\n");
    REQUIRE_THROWS_WITH(load_dataset(f.path),
                        Catch::Matchers::ContainsSubstring("out of range"));
    TempFile g("nan.csv",
               "location_id,lat,lon,time_index,response\n"
               "L1,51.0,-0.1,0,nan\n");
    REQUIRE_THROWS_WITH(load_dataset(g.path),
                        Catch::Matchers::ContainsSubstring("row 2"));
}

TEST_CASE("load_dataset names missing columns") {
    TempFile f("cols.csv", "location_id,lat,lon,response\nL1,51.5,-0.1,1.0\n");
    REQUIRE_THROWS_WITH(load_dataset(f.path),
                        Catch::Matchers::ContainsSubstring("time_index"));
}

TEST_CASE("save/load dataset round trip") {
    TempFile f("rt_in.csv", kSmallData);
    Dataset ds = load_dataset(f.path);
    TempFile g("rt_out.csv", "");
    save_dataset(ds, g.path);
    Dataset ds2 = load_dataset(g.path);
    REQUIRE(ds2.S() == ds.S());
    REQUIRE(ds2.T == ds.T);
    REQUIRE(ds2.N() == ds.N());
    for (int i = 0; i < ds.N(); ++i) {
        auto& a = ds.observations[static_cast<std::size_t>(i)];
        auto& b = ds2.observations[static_cast<std::size_t>(i)];
        REQUIRE(a.location_index == b.location_index);
        REQUIRE(a.time_index == b.time_index);
        REQUIRE(a.response == b.response);
        REQUIRE(a.covariates == b.covariates);
    }
}

namespace {
Dataset grid_dataset(int S, int T) {
    Dataset ds;
    ds.T = T;
    for (int i = 0; i < S; ++i)
        ds.locations.push_back({"g" + std::to_string(i), 51.0 + 0.001 * i, -0.1});
    for (int i = 0; i < S; ++i)
        for (int t = 0; t < T; ++t) {
            Observation obs;
            obs.location_index = i;
            obs.time_index = t;
            obs.response = i + 0.1 * t;
            ds.observations.push_back(obs);
        }
    return ds;
}
}  // namespace

TEST_CASE("partition covers locations disjointly with floor/remainder sizes") {
    Dataset ds = grid_dataset(983, 1);
    Partition p = partition_locations(ds, 20, 7);
    REQUIRE(p.Q() == 20);
    std::set<int> seen;
    for (int q = 0; q < 20; ++q) {
        int expect = q < 19 ? 49 : 52;
        REQUIRE(static_cast<int>(p.assignments[static_cast<std::size_t>(q)].size()) == expect);
        for (int g : p.assignments[static_cast<std::size_t>(q)]) {
            REQUIRE(seen.insert(g).second);
        }
    }
    REQUIRE(static_cast<int>(seen.size()) == 983);
}

TEST_CASE("partition is deterministic in the seed") {
    Dataset ds = grid_dataset(50, 1);
    Partition a = partition_locations(ds, 5, 11);
    Partition b = partition_locations(ds, 5, 11);
    Partition c = partition_locations(ds, 5, 12);
    REQUIRE(a.assignments == b.assignments);
    REQUIRE(a.assignments != c.assignments);
    REQUIRE_THROWS(partition_locations(ds, 0, 1));
    REQUIRE_THROWS(partition_locations(ds, 51, 1));
}

TEST_CASE("build_design orders rows and counts replicates") {
    TempFile f("design.csv", kSmallData);
    Dataset ds = load_dataset(f.path);
    DesignBundle d = build_design(ds, {1, 0});  // L2 first
    REQUIRE(d.m_q() == 2);
    REQUIRE(d.T == 3);
    REQUIRE(d.G_q() == 6);
    REQUIRE(d.N_q() == 5);
    // L2 rows come first (times 0 and 2), then L1 (two replicates at t=0, one at t=1)
    REQUIRE(d.Y(0) == 12.0);
    REQUIRE(d.Y(1) == 13.0);
    REQUIRE(d.cell_index == std::vector<int>{0, 2, 3, 3, 4});
    REQUIRE(d.K_diag == std::vector<int>{1, 0, 1, 2, 1, 0});
    int total = 0;
    for (int k : d.K_diag) total += k;
    REQUIRE(total == d.N_q());
    REQUIRE(d.X.col(0).isOnes());
    REQUIRE(d.X(0, 1) == 3.5);
    REQUIRE_THROWS(build_design(ds, {}));
    REQUIRE_THROWS(build_design(ds, {0, 9}));
}

TEST_CASE("replicates within a cell keep file order") {
    TempFile f("stable.csv", kSmallData);
    Dataset ds = load_dataset(f.path);
    DesignBundle d = build_design(ds, {0});
    // L1 cell (t=0) has responses 10.0 then 10.5, in file order
    REQUIRE(d.Y(0) == 10.0);
    REQUIRE(d.Y(1) == 10.5);
    REQUIRE(d.Y(2) == 11.0);
}

TEST_CASE("time trend covariates are normalized") {
    TimeTrend tt = time_trend_covariates(5);
    REQUIRE(tt.linear.front() == 0.0);
    REQUIRE(tt.linear.back() == 1.0);
    REQUIRE(tt.linear[2] == 0.5);
    REQUIRE(tt.quadratic[2] == 0.25);
    TimeTrend one = time_trend_covariates(1);
    REQUIRE(one.linear[0] == 0.0);
    REQUIRE_THROWS(time_trend_covariates(0));
}
