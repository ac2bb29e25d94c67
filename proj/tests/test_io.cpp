#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mkt/csv.hpp"
#include "mkt/errors.hpp"
#include "mkt/simulation.hpp"

using namespace mkt;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "mkt_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MKT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

} // namespace

TEST_CASE("CSV round trip is exact") {
    const auto x = simulate_var(random_stable_var(2, 2, 0.8, 1), 200, InnovationSpec::gaussian(2), 2);
    std::stringstream buf;
    write_csv(buf, x);
    CHECK(buf.str().rfind("x1,x2\n", 0) == 0);
    const auto y = read_csv(buf, 2);
    CHECK(y.values() == x.values());
}

TEST_CASE("CSV parsing") {
    std::istringstream no_header("1,2\n\n3,4\n");
    CHECK(read_csv(no_header).length() == 2);

    std::istringstream ragged("x1,x2\n1,2\n3\n");
    try {
        read_csv(ragged);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::istringstream text("x1\n1\nabc\n");
    CHECK_THROWS_AS(read_csv(text), ParseError);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_csv(empty), ParseError);
    std::istringstream header_only("x1,x2\n");
    CHECK_THROWS_AS(read_csv(header_only), ParseError);
    std::istringstream wrong_dim("x1,x2\n1,2\n");
    CHECK_THROWS_AS(read_csv(wrong_dim, 3), SchemaError);
    std::istringstream nan("x1\nnan\n");
    CHECK_THROWS_AS(read_csv(nan), ParseError);
    CHECK_THROWS_AS(read_csv_file("/nonexistent/file.csv"), InvalidArgument);
}

TEST_CASE("CLI exit codes") {
    const auto csv = scratch("series.csv");
    CHECK(run_cli("simulate --p 4 --N 2000 --embed 2 --dist uniform --out " + csv.string()) == 0);
    CHECK(run_cli("test " + csv.string() + " --tests B1_colored,B2_colored --dim 2") == 0);
    CHECK(run_cli("bench table9") == 2);
    CHECK(run_cli("simulate --N 0") == 2);
    CHECK(run_cli("test " + csv.string() + " --alpha 2") == 2);
    CHECK(run_cli("test " + csv.string() + " --dim 3") == 3);
    const auto broken = scratch("broken.csv");
    write_text(broken, "x1\n1\n2\noops\n");
    CHECK(run_cli("test " + broken.string()) == 3);
    const auto flat = scratch("flat.csv");
    write_text(flat, "x1\n1\n1\n1\n1\n1\n");
    CHECK(run_cli("test " + flat.string() + " --tests B1_iid") == 3);
    CHECK(run_cli("frobnicate") == 2);
}

TEST_CASE("CLI detect on a CSV stream emits JSON lines") {
    const auto csv = scratch("stream.csv");
    const auto out = scratch("stream.jsonl");
    CHECK(run_cli("simulate --p 5 --N 600 --out " + csv.string()) == 0);
    CHECK(run_cli("detect --in " + csv.string() + " --out " + out.string()) == 0);
    std::ifstream in(out);
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++count;
    CHECK(count == 600);
}
