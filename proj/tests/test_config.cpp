#include <doctest.h>

#include "tftsim/config.hpp"
#include "tftsim/errors.hpp"
#include "tftsim/experiments.hpp"
#include "tftsim/io.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace tft;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() / ("tftsim_test_" + std::to_string(std::rand()) + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const
    {
        write_text(path / name, text);
        return path / name;
    }
};

int run_cli(const std::string& args)
{
    const int st = std::system((std::string(TFTSIM_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

} // namespace

TEST_SUITE("config")
{
    TEST_CASE("formatting and hashing")
    {
        CHECK(fmt_num(0.0) == "0");
        CHECK(fmt_num(-0.0) == "0");
        CHECK(fmt_num(1.5) == "1.5");
        CHECK(fmt_num(1.0 / 3) == "0.333333333333");
        CHECK(fmt_num(std::nan("")) == "nan");
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    TEST_CASE("CSV writer and reader")
    {
        TempDir d;
        {
            CsvWriter w(d.path / "a.csv", {"x_ns", "label"});
            w << 1.25 << std::string("101");
            w.end_row();
            w << 2 << std::string("030");
            w.end_row();
            w << 1.0;
            CHECK_THROWS(w.end_row());
            CHECK_THROWS_AS(w << std::string("a,b"), ConfigError);
        }
        write_text(d.path / "b.csv", "x_ns,label\n1.25,101\n# comment\n2,030\n");
        const CsvTable t = read_csv(d.path / "b.csv");
        CHECK(t.rows.size() == 2);
        CHECK(t.column("label") == 1);
        CHECK(t.column("nope") == -1);
        CHECK(t.rows[1][1] == "030");
        write_text(d.path / "c.csv", "a,b\n1\n");
        CHECK_THROWS_AS(read_csv(d.path / "c.csv"), ConfigError);
    }

    TEST_CASE("output stage commits atomically")
    {
        TempDir d;
        const fs::path out = d.path / "out";
        {
            OutputStage s(out);
            write_text(s.file("a.txt"), "x");
        }
        CHECK(!fs::exists(out));
        {
            OutputStage s(out);
            write_text(s.file("a.txt"), "x");
            s.commit();
        }
        CHECK(read_text(out / "a.txt") == "x");
        CHECK(std::distance(fs::directory_iterator(out), fs::directory_iterator{}) == 1);
    }

    TEST_CASE("defaults, overrides and canonical text")
    {
        TempDir d;
        const auto p = d.write("c.json", R"({"experiment": "zz-sweep", "device": "fig2_model",
                                             "params": {"points": 5}, "threads": 2, "out": "res"})");
        const RunConfig rc = load_config(p, "zz-sweep", experiment_registry());
        CHECK(rc.params["points"] == 5);
        CHECK(rc.params["flux_lo"] == -0.05);
        CHECK(rc.threads == 2);
        CHECK(fs::path(rc.out_dir).filename() == "res");
        const RunConfig o = load_config(p, "zz-sweep", experiment_registry(), CliOverrides{7, 1, "elsewhere"});
        CHECK(o.threads == 1);
        CHECK(o.out_dir == "elsewhere");
        CHECK(o.seed.value() == 7);
        CHECK(o.config_text != rc.config_text);
        const auto q = d.write("q.json", R"({"out": "other", "threads": 4, "experiment": "zz-sweep",
                                             "params": {"points": 5}, "device": "fig2_model"})");
        const RunConfig rq = load_config(q, "zz-sweep", experiment_registry());
        CHECK(rq.config_text == rc.config_text);
    }

    TEST_CASE("validation errors name the offending key")
    {
        TempDir d;
        auto expect = [&](const std::string& text, const std::string& experiment, const std::string& needle) {
            const auto p = d.write("bad.json", text);
            try {
                load_config(p, experiment, experiment_registry());
                FAIL("accepted: " << text);
            } catch (const ConfigError& e) {
                CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
            }
        };
        expect(R"({"experiment": "zz-sweep", "device": "fig2_model", "params": {"pts": 3}})", "zz-sweep", "pts");
        expect(R"({"experiment": "zz-sweep", "device": "fig2_model", "params": {"points": "x"}})", "zz-sweep",
               "points");
        expect(R"({"experiment": "zz-sweep", "device": "fig2_model", "colour": 1})", "zz-sweep", "colour");
        expect(R"({"experiment": "zz-sweep", "device": "nope"})", "zz-sweep", "nope");
        expect(R"({"experiment": "zz-sweep"})", "zz-sweep", "device");
        expect(R"({"experiment": "rb"})", "rb", "seed");
        expect(R"({"experiment": "zz-sweep", "device": "fig2_model"})", "rb", "zz-sweep");
        expect(R"({"experiment": "zz-sweep", "device": "fig2_model", "spectrum": {"dims": [1, 4, 4]}})", "zz-sweep",
               "dims");
        expect("[1, 2", "zz-sweep", "parse");
    }

    TEST_CASE("device forms")
    {
        TempDir d;
        const DeviceEnergies a = preset_device("device_a");
        CHECK(parse_device("device_a", d.path).ej2 == a.ej2);
        const DeviceEnergies j = parse_device(device_to_json(a), d.path);
        CHECK(j.j12 == a.j12);
        CHECK(j.el_c == a.el_c);
        d.write("dev.json", device_to_json(a).dump());
        CHECK(parse_device(Json{{"file", "dev.json"}}, d.path).ejc == a.ejc);
        const DeviceEnergies f = parse_device(Json{{"preset", "device_a"}, {"qubit2_frequency_ghz", 4.2}}, d.path);
        CHECK(f.ej2 < a.ej2);
        CHECK_THROWS_AS(parse_device(Json{{"energies_ghz", {{"ec1", 0.2}}}}, d.path), ConfigError);
    }

    TEST_CASE("channel files")
    {
        const Json j = Json::parse(R"({"full_scale_mv": 500, "cplr": [{"exp": [[5, 160]], "osc": [[-9, 2, 490, 1.5]]}],
                                       "cplr_to_qb2": [{"exp": [[-100, 185]]}, {"exp": [[3, 15]]}]})");
        const ChannelSet s = parse_channel_file(j);
        REQUIRE(s.cc.size() == 1);
        CHECK(s.cc[0].exps[0].amplitude == doctest::Approx(0.01));
        CHECK(s.cc[0].oscs[0].period == 490);
        REQUIRE(s.c2c.size() == 1);
        CHECK(s.c2c[0].direct == 0);
        CHECK(s.c2c[0].exps.size() == 2);
        CHECK(s.c2.empty());
        CHECK_THROWS_AS(parse_channel_file(Json::parse(R"({"cplr": [{"exp": [[1]]}]})")), ConfigError);
        CHECK_THROWS_AS(parse_channel_file(Json::parse(R"({"cpl": []})")), ConfigError);
    }

    TEST_CASE("schema lists every experiment")
    {
        const Json s = config_schema(experiment_registry());
        CHECK(s["oneOf"].size() == experiment_registry().size());
        CHECK(experiment_registry().size() == 13);
        const std::string text = s.dump();
        for (const auto& e : experiment_registry())
            CHECK(text.find("\"" + e.name + "\"") != std::string::npos);
    }
}

TEST_SUITE("cli")
{
    TEST_CASE("exit codes and no partial outputs")
    {
        TempDir d;
        const auto bad = d.write("bad.json", R"({"experiment": "zz-sweep", "device": "fig2_model", "params": {"x": 1}})");
        CHECK(run_cli("zz-sweep --config " + bad.string() + " --out " + (d.path / "o1").string()) == 2);
        CHECK(!fs::exists(d.path / "o1"));

        const auto num = d.write("num.json", R"({"experiment": "zero-zz", "device": "fig2_model",
                                                  "params": {"flux_lo": 0.3, "flux_hi": 0.31}})");
        CHECK(run_cli("zero-zz --config " + num.string() + " --out " + (d.path / "o2").string()) == 3);
        CHECK(!fs::exists(d.path / "o2"));

        CHECK(run_cli("zz-sweep --config " + (d.path / "missing.json").string()) == 2);
        CHECK(run_cli("no-such-experiment") == 2);
        CHECK(run_cli("schema -o " + (d.path / "schema.json").string()) == 0);
        CHECK(Json::parse(read_text(d.path / "schema.json")).contains("oneOf"));
    }

    TEST_CASE("a run writes artifacts and a manifest")
    {
        TempDir d;
        const auto cfg = d.write("c.json", R"({"experiment": "error-budget", "params": {"qubits": [
                                 {"name": "q", "gate_time_ns": 40, "t1_us": 50, "t2e_us": 60}]}})");
        REQUIRE(run_cli("error-budget --config " + cfg.string() + " --out " + (d.path / "o").string()) == 0);
        const Json m = Json::parse(read_text(d.path / "o" / "manifest.json"));
        CHECK(m["experiment"] == "error-budget");
        CHECK(m["config_sha256"].get<std::string>().size() == 64);
        for (const auto& o : m["outputs"])
            CHECK(sha256_file(d.path / "o" / o["file"].get<std::string>()) == o["sha256"]);
        const CsvTable t = read_csv(d.path / "o" / "error_budget.csv");
        CHECK(t.rows.size() == 1);
    }

    TEST_CASE("every example configuration validates")
    {
        for (const auto& e : fs::directory_iterator(TFTSIM_CONFIGS)) {
            if (e.path().extension() != ".json")
                continue;
            const Json j = Json::parse(read_text(e.path()));
            CHECK_NOTHROW(load_config(e.path(), j["experiment"].get<std::string>(), experiment_registry()));
        }
    }
}
