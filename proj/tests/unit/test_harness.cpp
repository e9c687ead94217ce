#include "filterstab/canned.hpp"
#include "filterstab/config.hpp"
#include "filterstab/experiment.hpp"
#include "filterstab/io.hpp"
#include "filterstab/seed.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <unordered_set>

using namespace filterstab;

namespace {

std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("filterstab-harness-" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

Json small_config()
{
    return Json::parse(R"({
      "schema_version": 1,
      "name": "small",
      "model": {"family": "finite-hmm", "matrix": [[0.7, 0.3], [0.3, 0.7]], "atoms": [1, 2],
                "observation_laws": [{"family": "normal", "mean": 0, "std": 1},
                                     {"family": "normal", "mean": 1, "std": 1}]},
      "true_prior": {"family": "finite", "weights": [0.5, 0.5]},
      "filter_prior": {"family": "finite", "weights": [0.9, 0.1]},
      "f": [{"family": "polynomial", "coefficients": [0, 1]}],
      "g": [{"family": "indicator", "lo": 0, "hi": 1}],
      "metrics": ["tv", "weak-f", "predictor-g", "rho-diff"],
      "n_max": 10, "trials": 64, "seed": 3
    })");
}

std::string config_error_of(const Json& j)
{
    try {
        parse_config(j);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config_invalid);
        return e.what();
    }
    ADD_FAILURE() << "config accepted";
    return {};
}

} // namespace

TEST(Seeds, DistinctTrialsDistinctSeeds)
{
    EXPECT_NE(derive_seed(7, 0), derive_seed(7, 1));
}

TEST(Seeds, PinnedValue)
{
    // reference from an independent splitmix64 implementation
    EXPECT_EQ(derive_seed(7, 3), 0x6baa78681a99f995ULL);
    EXPECT_EQ(derive_seed(7, 0), 0xb8b4c2977eabce45ULL);
}

TEST(Seeds, NoCollisionsInTenThousand)
{
    std::unordered_set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 10000; ++t) {
        EXPECT_TRUE(seen.insert(derive_seed(20240401, t)).second) << t;
    }
}

TEST(Io, Sha256KnownVector)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, CsvQuotingRoundTrips)
{
    CsvTable t({"a", "b"});
    t.add_row({"plain", "with,comma"});
    t.add_row({"say \"hi\"", "two\nlines"});
    const auto text = t.str();
    EXPECT_EQ(text, "a,b\r\nplain,\"with,comma\"\r\n\"say \"\"hi\"\"\",\"two\nlines\"\r\n");
    const auto rec = parse_csv(text);
    ASSERT_EQ(rec.size(), 3u);
    EXPECT_EQ(rec[1][1], "with,comma");
    EXPECT_EQ(rec[2][0], "say \"hi\"");
    EXPECT_EQ(rec[2][1], "two\nlines");
}

TEST(Io, CsvRowWidthChecked)
{
    CsvTable t({"a", "b"});
    EXPECT_THROW(t.add_row({"1"}), Error);
}

TEST(Io, AtomicWriteReplacesAndLeavesNoTemp)
{
    const auto dir = scratch_dir("atomic");
    const auto file = dir / "x.txt";
    write_file_atomic(file, "first");
    write_file_atomic(file, "second");
    EXPECT_EQ(read_file(file), "second");
    EXPECT_FALSE(std::filesystem::exists(dir / "x.txt.tmp"));
}

TEST(Config, ParsesAndEchoesCanonically)
{
    const auto cfg = parse_config(small_config());
    EXPECT_EQ(cfg.name, "small");
    EXPECT_EQ(cfg.trials, 64u);
    EXPECT_EQ(cfg.metrics.size(), 4u);
    const auto echo = to_json(cfg);
    EXPECT_EQ(to_json(parse_config(echo)), echo);
}

TEST(Config, RejectsUnknownFieldsWithPath)
{
    auto j = small_config();
    j["bogus"] = 1;
    EXPECT_NE(config_error_of(j).find("bogus: unknown field"), std::string::npos);

    j = small_config();
    j["model"]["observation_laws"][1]["sd"] = 1;
    EXPECT_NE(config_error_of(j).find("model.observation_laws[1].sd"), std::string::npos);
}

TEST(Config, FieldErrorsNameTheirPath)
{
    const std::vector<std::pair<std::string, std::function<void(Json&)>>> cases{
        {"trials", [](Json& j) { j["trials"] = 0; }},
        {"n_max", [](Json& j) { j["n_max"] = -3; }},
        {"schema_version", [](Json& j) { j["schema_version"] = 2; }},
        {"metrics[1]", [](Json& j) { j["metrics"][1] = "weak"; }},
        {"f", [](Json& j) { j.erase("f"); }},
        {"true_prior.weights", [](Json& j) { j["true_prior"]["weights"] = {1.0}; }},
        {"filter_prior.weights", [](Json& j) { j["filter_prior"]["weights"] = {0.7, 0.7}; }},
        {"model.family", [](Json& j) { j["model"]["family"] = "hmm"; }},
        {"g[0].family", [](Json& j) { j["g"][0]["family"] = "tanh"; }},
        {"model.observation_laws[0].std", [](Json& j) { j["model"]["observation_laws"][0]["std"] = 0; }},
        {"grid", [](Json& j) { j["grid"] = {{"lo", -1}, {"hi", 1}, {"cells", 64}}; }},
        {"method", [](Json& j) { j["method"] = "enumeration"; }},
        {"seed", [](Json& j) { j["seed"] = "seven"; }},
    };
    for (const auto& [path, mutate] : cases) {
        auto j = small_config();
        mutate(j);
        const auto msg = config_error_of(j);
        EXPECT_NE(msg.find(path + ":"), std::string::npos) << path << " -> " << msg;
    }
}

TEST(Config, DeclaredMomentMatrixChecked)
{
    auto j = small_config();
    j["model"]["moment_matrix"] = {{0.0, 1.0}, {1.0, 2.0}};
    EXPECT_NO_THROW(parse_config(j));
    j["model"]["moment_matrix"][1][1] = 2.5;
    EXPECT_NE(config_error_of(j).find("model.moment_matrix[1][1]"), std::string::npos);
}

TEST(Config, ContinuousModelsNeedGridAndDensityPriors)
{
    Json base;
    for (const auto& j : detail::canned_json()) {
        if (j["name"] == "linear-prop5") {
            base = j;
        }
    }
    auto j = base;
    j.erase("grid");
    EXPECT_NE(config_error_of(j).find("grid:"), std::string::npos);
    j = base;
    j["true_prior"] = {{"family", "finite"}, {"weights", {1.0}}};
    EXPECT_NE(config_error_of(j).find("true_prior.family:"), std::string::npos);
    j = base;
    j["t_values"] = Json::array();
    EXPECT_NE(config_error_of(j).find("t_values:"), std::string::npos);
}

TEST(Config, LoadReportsPath)
{
    try {
        load_config("/definitely/not/here.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config_invalid);
        EXPECT_NE(std::string(e.what()).find("/definitely/not/here.json"), std::string::npos);
    }
    const auto dir = scratch_dir("load");
    write_file_atomic(dir / "bad.json", "{ \"schema_version\": 1, ");
    try {
        load_config(dir / "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
    }
}

TEST(Canned, ExactlyTheFiveFixtures)
{
    std::vector<std::string> names;
    for (const auto& c : canned_experiments()) {
        names.push_back(c.name);
    }
    EXPECT_EQ(names, (std::vector<std::string>{"hmm-prop4", "hmm-prop4-negative", "sg-volatility", "linear-prop5",
                                               "mixing-rate"}));
}

TEST(Canned, EachValidatesAndRoundTrips)
{
    for (const auto& c : canned_experiments()) {
        const auto echo = to_json(c);
        EXPECT_EQ(to_json(parse_config(echo)), echo) << c.name;
    }
}

TEST(Canned, Prop4DeclaresGaussianMomentMatrix)
{
    const auto cfg = canned_experiment("hmm-prop4");
    const auto& spec = std::get<FiniteHmmSpec>(cfg.model);
    ASSERT_TRUE(spec.moment_matrix);
    // E N(0,1) = 0, E N(0,1)^2 = 1, E N(1,1) = 1, E N(1,1)^2 = 1 + 1
    EXPECT_EQ(*spec.moment_matrix, (Matrix{{0.0, 1.0}, {1.0, 2.0}}));
    const auto b = config_moment_matrix(cfg);
    ASSERT_TRUE(b);
    EXPECT_NEAR(b->determinant, -1.0, 1e-8);
}

TEST(Experiment, EqualPriorsSingleTrial)
{
    auto j = small_config();
    j["filter_prior"] = j["true_prior"];
    j["trials"] = 1;
    j["n_max"] = 1;
    const auto dir = scratch_dir("trivial");
    RunOptions opt;
    opt.output_dir = dir;
    const auto res = run_experiment(parse_config(j), opt);
    EXPECT_EQ(res.status, RunStatus::ok);
    for (const auto& s : res.estimate->series) {
        for (double v : s.metric) {
            EXPECT_LT(v, 1e-12) << to_string(s.kind);
        }
    }
    EXPECT_EQ(res.manifest["trials"]["failed"], 0);
    EXPECT_EQ(res.manifest["status"], "OK");
}

TEST(Experiment, CsvLayout)
{
    const auto dir = scratch_dir("layout");
    RunOptions opt;
    opt.output_dir = dir;
    const auto res = run_experiment(parse_config(small_config()), opt);
    const auto rec = parse_csv(read_file(dir / "weak-f.csv"));
    ASSERT_EQ(rec.size(), 12u);
    EXPECT_EQ(rec[0], series_csv_columns);
    EXPECT_EQ(rec[1][0], "0");
    EXPECT_EQ(rec[1][4], "weak-f");
    EXPECT_EQ(rec[1][6], "poly(0;1)");
    EXPECT_EQ(rec[1][7], "3");
    EXPECT_EQ(parse_csv(read_file(dir / "predictor-g.csv")).size(), 11u);
    EXPECT_EQ(res.outputs.size(), 4u);
}

TEST(Experiment, SameConfigSameBytes)
{
    const auto cfg = parse_config(small_config());
    const auto a = scratch_dir("bytes-a");
    const auto b = scratch_dir("bytes-b");
    RunOptions oa;
    oa.output_dir = a;
    oa.workers = 1;
    RunOptions ob;
    ob.output_dir = b;
    ob.workers = 3;
    const auto ra = run_experiment(cfg, oa);
    run_experiment(cfg, ob);
    for (const auto& o : ra.outputs) {
        EXPECT_EQ(read_file(a / o.file), read_file(b / o.file)) << o.file;
    }
}

TEST(Experiment, ManifestMatchesFiles)
{
    const auto dir = scratch_dir("manifest");
    RunOptions opt;
    opt.output_dir = dir;
    const auto res = run_experiment(parse_config(small_config()), opt);
    EXPECT_TRUE(verify_manifest(dir).empty());
    const auto m = Json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(m["outputs"].size(), 4u);
    EXPECT_EQ(m["rng"]["master_seed"], 3);
    EXPECT_EQ(m["config"], to_json(parse_config(small_config())));
    EXPECT_TRUE(m["mixing"]["lambda_circ"].is_number());
    EXPECT_EQ(m["conditions"].size(), 1u);

    auto text = read_file(dir / "tv.csv");
    text += "99,0,0,1,tv,x,,3\r\n";
    write_file_atomic(dir / "tv.csv", text);
    const auto problems = verify_manifest(dir);
    EXPECT_EQ(problems.size(), 2u); // row count and hash
}

TEST(Experiment, InadmissiblePriorRejected)
{
    auto j = small_config();
    j["filter_prior"]["weights"] = {1.0, 0.0};
    const auto dir = scratch_dir("rejected");
    RunOptions opt;
    opt.output_dir = dir;
    const auto res = run_experiment(parse_config(j), opt);
    EXPECT_EQ(res.status, RunStatus::rejected);
    EXPECT_NE(res.rejection.find("NotAbsolutelyContinuous"), std::string::npos);
    const auto m = Json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(m["status"], "REJECTED");
    EXPECT_FALSE(m["admissibility"]["admissible"].get<bool>());
    EXPECT_TRUE(m["outputs"].empty());
}

TEST(Experiment, EnumerationIsExact)
{
    auto j = small_config();
    j["model"] = {{"family", "alphabet-hmm"},
                  {"matrix", {{0.7, 0.3}, {0.3, 0.7}}},
                  {"atoms", {1, 2}},
                  {"letters", {0, 1}},
                  {"emission", {{0.9, 0.1}, {0.2, 0.8}}}};
    j["method"] = "enumeration";
    j["n_max"] = 6;
    const auto dir = scratch_dir("enumeration");
    RunOptions opt;
    opt.output_dir = dir;
    const auto res = run_experiment(parse_config(j), opt);
    EXPECT_TRUE(res.estimate->exact);
    EXPECT_EQ(res.estimate->trials_requested, 64u);
    for (const auto& s : res.estimate->series) {
        for (double e : s.std_err) {
            EXPECT_EQ(e, 0.0);
        }
    }
    EXPECT_TRUE(res.manifest["trials"]["exact"].get<bool>());
}
