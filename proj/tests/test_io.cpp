#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "koopman/cli.hpp"
#include "koopman/io.hpp"

using namespace koopman;

namespace {

std::filesystem::path scratch_dir() {
    auto p = std::filesystem::temp_directory_path() / "koopman_io_tests";
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("csv snapshot ingestion: shape and values") {
    std::istringstream in("1,2,3,4\n5,6,7,8\n9,10,11,12\n");
    auto s = io::parse_snapshots_csv(in, "test");
    CHECK(s.m == 3);
    CHECK(s.count() == 4);
    CHECK(s.columns[0][0] == cdouble(1.0));
    CHECK(s.columns[3][2] == cdouble(12.0));
}

TEST_CASE("csv snapshot ingestion: complex fields") {
    std::istringstream in("1.5+0.25j,2-1j\n-3j,4\n");
    auto s = io::parse_snapshots_csv(in, "test");
    CHECK(s.columns[0][0] == cdouble(1.5, 0.25));
    CHECK(s.columns[1][0] == cdouble(2.0, -1.0));
    CHECK(s.columns[0][1] == cdouble(0.0, -3.0));
    CHECK(s.columns[1][1] == cdouble(4.0, 0.0));
}

TEST_CASE("csv snapshot ingestion: errors carry line numbers") {
    std::istringstream ragged("1,2,3\n4,5\n");
    CHECK_THROWS_WITH_AS(io::parse_snapshots_csv(ragged, "f"),
                         doctest::Contains("line 2"), input_error);

    std::istringstream bad("1,2\n3,4\n5,6\n1,2\n5,qq\n1,2\n1,2\n");
    try {
        io::parse_snapshots_csv(bad, "f");
        FAIL("expected parse error");
    } catch (const input_error& e) {
        CHECK(std::string(e.what()).find("line 5") != std::string::npos);
        CHECK(std::string(e.what()).find("qq") != std::string::npos);
    }

    std::istringstream empty("");
    CHECK_THROWS_AS(io::parse_snapshots_csv(empty, "f"), input_error);
}

TEST_CASE("snapshot round trip through both formats") {
    auto dir = scratch_dir();
    std::vector<CVec> cols = {{cdouble(1.125, -0.375), cdouble(2.0)},
                              {cdouble(-0.0625, 3.5), cdouble(0.0, 1.0)},
                              {cdouble(0.1), cdouble(1e-17, -2.25)}};
    auto s = SnapshotMatrix::from_columns(cols);

    auto pcsv = dir / "snap.csv";
    io::emit_snapshots(pcsv.string(), s, io::Format::Csv);
    auto back = io::ingest_snapshots(pcsv.string());
    REQUIRE(back.m == s.m);
    REQUIRE(back.count() == s.count());
    for (std::size_t k = 0; k < s.count(); ++k)
        for (std::size_t i = 0; i < s.m; ++i) CHECK(back.columns[k][i] == s.columns[k][i]);

    auto pjson = dir / "snap.json";
    io::emit_snapshots(pjson.string(), s, io::Format::Json);
    auto back2 = io::ingest_snapshots(pjson.string());
    for (std::size_t k = 0; k < s.count(); ++k)
        for (std::size_t i = 0; i < s.m; ++i) CHECK(back2.columns[k][i] == s.columns[k][i]);
}

TEST_CASE("run: dmd on the built-in diagonal system") {
    cli::RunConfig cfg;
    cfg.command = "dmd";
    cfg.system = "diagonal";
    cfg.params = {{"mu", "0.9:0.5"}, {"x0", "1:1"}, {"n", "2"}};
    auto b = cli::run(cfg);
    REQUIRE(!b.tables.empty());
    const auto& ritz = b.tables.front();
    REQUIRE(ritz.rows.size() == 2);
    std::vector<double> values;
    for (const auto& row : ritz.rows) values.push_back(row[1]);  // re_value
    std::sort(values.begin(), values.end());
    CHECK(values[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(values[1] == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(b.diagnostics["residual_norm"].get<double>() < 1e-10);
    CHECK(b.metadata["command"] == "dmd");
}

TEST_CASE("run: dmd from an ingested snapshot file with transient slice") {
    auto dir = scratch_dir();
    auto path = dir / "geo.csv";
    {
        std::ofstream out(path);
        // a transient junk column, then a clean 0.8-geometric sequence
        out << "99,1,0.8,0.64,0.512\n";
    }
    cli::RunConfig cfg;
    cfg.command = "dmd";
    cfg.input = path.string();
    cfg.params = {{"col0", "1"}, {"col1", "5"}, {"variant", "svd"}};
    auto b = cli::run(cfg);
    const auto& ritz = b.tables.front();
    REQUIRE(ritz.rows.size() == 1);
    CHECK(ritz.rows[0][1] == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("run: unknown parameter keys are rejected") {
    cli::RunConfig cfg;
    cfg.command = "dmd";
    cfg.system = "diagonal";
    cfg.params = {{"mu", "0.9:0.5"}, {"x0", "1:1"}, {"n", "2"}, {"bogus", "1"}};
    CHECK_THROWS_WITH_AS(cli::run(cfg), doctest::Contains("bogus"), input_error);
}

TEST_CASE("run: csv and json payloads agree to full printed precision") {
    auto dir = scratch_dir();
    cli::RunConfig cfg;
    cfg.command = "average";
    cfg.system = "standard_map";
    cfg.params = {{"eps", "0.15"}, {"grid", "0:1:4;0:1:4"}, {"n", "500"},
                  {"obs", "harmonic"},  {"k", "1:0"},        {"omega", "0"}};

    cfg.out = (dir / "avg.csv").string();
    cfg.format = io::Format::Csv;
    auto b1 = cli::run(cfg);
    cli::finish(cfg, b1);

    cfg.out = (dir / "avg.json").string();
    cfg.format = io::Format::Json;
    auto b2 = cli::run(cfg);
    cli::finish(cfg, b2);

    // parse both payloads and compare every number's 17-digit rendering
    std::string csv = slurp(dir / "avg.csv");
    std::vector<std::string> csv_numbers;
    std::istringstream lines(csv);
    std::string line;
    bool in_data = false;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!in_data) {  // header
            in_data = true;
            continue;
        }
        for (const auto& tok : io::detail::split(line, ',')) csv_numbers.push_back(tok);
    }
    nlohmann::json j = nlohmann::json::parse(slurp(dir / "avg.json"));
    std::vector<std::string> json_numbers;
    for (const auto& row : j["tables"]["averages"]["rows"])
        for (const auto& v : row) json_numbers.push_back(io::fmt_double(v.get<double>()));
    REQUIRE(csv_numbers.size() == json_numbers.size());
    for (std::size_t i = 0; i < csv_numbers.size(); ++i)
        CHECK(csv_numbers[i] == json_numbers[i]);
}

TEST_CASE("run: deterministic output for a deterministic config") {
    cli::RunConfig cfg;
    cfg.command = "average";
    cfg.system = "standard_map";
    cfg.params = {{"eps", "0.3"}, {"grid", "0:1:3;0:1:3"}, {"n", "300"},
                  {"obs", "harmonic"}, {"k", "1:1"},       {"omega", "0.25"}};
    auto b1 = cli::run(cfg);
    auto b2 = cli::run(cfg);
    REQUIRE(b1.tables.front().rows.size() == b2.tables.front().rows.size());
    for (std::size_t i = 0; i < b1.tables.front().rows.size(); ++i)
        for (std::size_t c = 0; c < b1.tables.front().rows[i].size(); ++c)
            CHECK(b1.tables.front().rows[i][c] == b2.tables.front().rows[i][c]);
}

TEST_CASE("run: quotient on a tiny rotation family") {
    cli::RunConfig cfg;
    cfg.command = "quotient";
    cfg.system = "standard_map";
    cfg.params = {{"eps", "0"},    {"grid", "0.1:0.1:1;0.05:0.95:8"}, {"n", "2000"},
                  {"kmax", "3"},   {"n_coords", "2"},                  {"k_clusters", "2"}};
    auto b = cli::run(cfg);
    const auto& t = b.tables.front();
    CHECK(t.rows.size() == 8);
    CHECK(t.columns.size() == 2 + 2 + 2);  // coords, chi1..2, label, N_used
    CHECK(b.diagnostics.contains("bandwidth"));
}

TEST_CASE("run: search decreases the coverage proxy") {
    cli::RunConfig cfg;
    cfg.command = "search";
    cfg.params = {{"agents", "0.2:0.2:1"},
                  {"target", "gaussian:0.7:0.7:0.15:0.15"},
                  {"kmax", "4"},
                  {"steps", "25"},
                  {"dt", "0.04"},
                  {"headings", "8"}};
    auto b = cli::run(cfg);
    const auto& t = b.tables.front();
    REQUIRE(t.rows.size() == 25);
    double first = t.rows.front().back(), last = t.rows.back().back();
    CHECK(last < first);
}

TEST_CASE("run: indicator series through the dispatcher") {
    cli::RunConfig cfg;
    cfg.command = "indicator";
    cfg.system = "standard_map";
    cfg.params = {{"eps", "1.0"}, {"x0", "0.6:0.5"}, {"kind", "sobolev"},
                  {"n", "2000"},  {"stride", "500"}, {"kmax", "3"}};
    auto b = cli::run(cfg);
    REQUIRE(b.tables.front().rows.size() == 4);
    double first = b.tables.front().rows.front()[1];
    double last = b.tables.front().rows.back()[1];
    CHECK(last < first);
    CHECK(b.diagnostics["kind"] == "sobolev");
}

TEST_CASE("run: mixing indicator ingests a coefficient history") {
    auto dir = scratch_dir();
    auto path = dir / "hist.csv";
    {
        // 9 rows = (2*1+1)^2 grid coefficients, 3 time columns; constant at uniform
        std::ofstream out(path);
        for (int i = 0; i < 9; ++i) {
            bool is_zero_mode = (i == 4);
            out << (is_zero_mode ? "1,1,1" : "0,0,0") << "\n";
        }
    }
    cli::RunConfig cfg;
    cfg.command = "indicator";
    cfg.input = path.string();
    cfg.params = {{"kind", "mixing"}, {"kmax", "1"}, {"dims", "2"}, {"target", "uniform"}};
    auto b = cli::run(cfg);
    REQUIRE(b.tables.front().rows.size() == 3);
    for (const auto& row : b.tables.front().rows) CHECK(row[1] == 0.0);
    CHECK(b.diagnostics["s"].get<double>() == 0.5);
}

TEST_CASE("run: charted bounded system accepts seeds in original coordinates") {
    cli::RunConfig cfg;
    cfg.command = "quotient";
    cfg.system = "double_well";
    cfg.params = {{"k", "1"},          {"b", "2"},
                  {"dt", "0.05"},      {"substeps", "5"},
                  {"window", "-1.7:1.7;-2.1:2.1"},
                  {"grid", "-0.9:0.9:4;0:0:1"},
                  {"n", "2000"},       {"kmax", "3"},
                  {"n_coords", "2"},   {"k_clusters", "2"}};
    auto b = cli::run(cfg);
    const auto& t = b.tables.front();
    REQUIRE(t.rows.size() == 4);
    // rows echo the original (q, p) seeds, and the two wells get distinct labels
    CHECK(t.rows.front()[0] == doctest::Approx(-0.9));
    CHECK(t.rows.back()[0] == doctest::Approx(0.9));
    double label_left = t.rows[0].rbegin()[1];
    double label_right = t.rows[3].rbegin()[1];
    CHECK(label_left != label_right);
    CHECK(t.rows[1].rbegin()[1] == label_left);
    CHECK(t.rows[2].rbegin()[1] == label_right);
}

TEST_CASE("run: adaptive quotient reports non-convergence via exit code 3") {
    auto dir = scratch_dir();
    cli::RunConfig cfg;
    cfg.command = "quotient";
    cfg.system = "standard_map";
    cfg.params = {{"eps", "0.18"}, {"grid", "0.3:0.7:2;0.55:0.65:2"}, {"tol", "1e-12"},
                  {"checkpoint", "100"}, {"n_max", "500"}, {"kmax", "2"},
                  {"n_coords", "2"}, {"k_clusters", "2"}};
    cfg.out = (dir / "unconv.csv").string();
    auto b = cli::run(cfg);
    CHECK(b.diagnostics["converged"] == false);
    CHECK(cli::finish(cfg, b) == 3);
    CHECK(std::filesystem::exists(cfg.out));  // results still written
}

TEST_CASE("cli binary: exit codes and output files") {
    auto dir = scratch_dir();
    auto out = dir / "ritz.csv";
    std::string cli = KOOPMAN_CLI_PATH;

    std::string ok = cli +
                     " dmd --system diagonal --params mu=0.9:0.5,x0=1:1,n=2 --out " +
                     out.string() + " --format csv";
    CHECK(std::system(ok.c_str()) == 0);
    std::string body = slurp(out);
    CHECK(body.find("re_value") != std::string::npos);
    CHECK(body.find("# command = dmd") != std::string::npos);

    std::string unknown_flag = cli + " dmd --system diagonal --frobnicate 2>/dev/null";
    CHECK(WEXITSTATUS(std::system(unknown_flag.c_str())) == 1);

    std::string bad_param = cli + " dmd --system diagonal --params nope=1 2>/dev/null";
    CHECK(WEXITSTATUS(std::system(bad_param.c_str())) == 1);

    std::string numerical = cli +
                            " dmd --system circle_rotation --params omega0=0.25,x0=0.1,n=5,"
                            "obs=harmonic,k=1 2>/dev/null";
    CHECK(WEXITSTATUS(std::system(numerical.c_str())) == 2);  // rank-deficient r > degree

    std::string missing = cli + " average --system standard_map 2>/dev/null";
    CHECK(WEXITSTATUS(std::system(missing.c_str())) == 1);
}
