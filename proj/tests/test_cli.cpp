#include "growflow/cli/run_config.hpp"
#include "growflow/core/errors.hpp"
#include "growflow/core/image_io.hpp"
#include "growflow/splat/render.hpp"
#include "growflow/train/model.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace growflow;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "growflow_cli_test";

struct Result {
  int code = 0;
  std::string err;
};

Result run(const std::string& args) {
  const char* exe = std::getenv("GROWFLOW_CLI");
  REQUIRE_MESSAGE(exe != nullptr, "GROWFLOW_CLI is not set");
  const fs::path err = kRoot / "stderr.txt";
  const std::string cmd = std::string(exe) + " " + args + " > " + (kRoot / "stdout.txt").string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Tiny scene and training counts so each command finishes quickly.
const char* kConfig = R"({
  "scene": {"n_stems": 1, "n_branch_events": 1, "n_gaussians": 4, "n_timesteps": 3, "camera_count": 4,
            "image_size": 16, "held_out_every": 2, "seed": 3},
  "train": {"n_static": 6, "n_boundary": 2, "n_global": 3, "view_batch": 2, "substeps": 2, "checkpoint_every": 0,
            "field": {"spatial_resolution": 4, "temporal_resolution": 3, "levels": 2, "features": 2, "hidden": 8,
                      "fourier_bands": 2}}
})";

// What the PNG writer stores for img, decoded again.
Image read_png_roundtrip(const Image& img) {
  const fs::path p = kRoot / "roundtrip.png";
  write_png(p, img);
  return read_png(p);
}

// Every file under dir, by relative path, with its bytes.
std::map<std::string, std::string> digest(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

struct Fixture {
  fs::path cfg = kRoot / "cfg.json";
  fs::path data = kRoot / "data";

  Fixture() {
    static bool ready = false;
    if (ready) return;
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    write_file(cfg, kConfig);
    REQUIRE(run("gen --config " + cfg.string() + " --out " + data.string()).code == 0);
    ready = true;
  }
};

}  // namespace

TEST_CASE("run config: defaults, overrides, unknown keys") {
  const auto d = cli::parse_run_config("{}");
  CHECK(d.train.n_static == 30000);
  CHECK(d.train.view_batch == 30);
  CHECK(d.scene.held_out_every == 10);
  CHECK(d.integration.method == ode::Method::Rk45Adaptive);

  const auto c = cli::parse_run_config(R"({"train": {"lr_grid": 0.01, "field": {"hidden": 12}}, "scene": {"seed": 9}})");
  CHECK(c.train.lr_grid == 0.01);
  CHECK(c.train.field.hidden == 12);
  CHECK(c.scene.seed == 9);

  auto key_error = [](const std::string& text) {
    try {
      cli::parse_run_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(key_error(R"({"train": {"lr_grdi": 1}})").find("train.lr_grdi") != std::string::npos);
  CHECK(key_error(R"({"train": {"field": {"hiden": 1}}})").find("train.field.hiden") != std::string::npos);
  CHECK(key_error(R"({"bogus": 1})").find("bogus") != std::string::npos);
  CHECK(key_error(R"({"train": {"n_static": "many"}})").find("train.n_static") != std::string::npos);
  CHECK(key_error("{not json") != "no error");

  // serialization round trip
  const auto text = cli::to_json(c);
  CHECK(cli::to_json(cli::parse_run_config(text)) == text);
}

TEST_CASE("gen: layout, camera count, determinism, bad config") {
  Fixture f;
  CHECK(fs::exists(f.data / "cameras.json"));
  CHECK(fs::exists(f.data / "times.json"));
  CHECK(fs::exists(f.data / "ground_truth.json"));
  CHECK(fs::exists(f.data / "images" / "t0" / "cam3.png"));
  CHECK(fs::exists(f.data / "masks" / "t2" / "cam0.png"));
  auto cams = nlohmann::json::parse(slurp(f.data / "cameras.json"));
  const auto& list = cams.is_array() ? cams : cams.at("cameras");
  CHECK(list.size() == 4);

  const fs::path again = kRoot / "data_again";
  REQUIRE(run("gen --config " + f.cfg.string() + " --out " + again.string()).code == 0);
  CHECK(digest(again) == digest(f.data));

  const fs::path bad = kRoot / "bad.json";
  write_file(bad, R"({"scene": {"n_stemz": 2}})");
  auto r = run("gen --config " + bad.string() + " --out " + (kRoot / "x").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("scene.n_stemz") != std::string::npos);

  CHECK(run("gen --config " + (kRoot / "missing.json").string() + " --out " + (kRoot / "y").string()).code != 0);
  CHECK(run("nonsense").code != 0);
}

TEST_CASE("train stages, resume, skip-boundary, encoder swap") {
  Fixture f;
  const fs::path out = kRoot / "run";
  const std::string base = "train --dataset " + f.data.string() + " --config " + f.cfg.string() + " --out ";

  auto missing = run(base + (kRoot / "empty").string() + " --stage boundary");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("static") != std::string::npos);
  CHECK(run(base + out.string() + " --stage sideways").code == 2);

  REQUIRE(run(base + out.string() + " --stage static").code == 0);
  CHECK(fs::exists(out / "static.ckpt"));
  REQUIRE(run(base + out.string() + " --stage boundary").code == 0);
  REQUIRE(run(base + out.string() + " --stage global").code == 0);
  const auto model = train::load_model(out / "model.ckpt");
  REQUIRE(model.cache.has_value());
  CHECK(model.cache->snapshots.size() == 2);
  CHECK(model.scene == train::load_model(out / "static.ckpt").scene);
  CHECK(fs::exists(out / "train_log.tsv"));

  // a full run in one call writes the same model
  const fs::path all = kRoot / "run_all";
  REQUIRE(run(base + all.string()).code == 0);
  CHECK(slurp(all / "model.ckpt") == slurp(out / "model.ckpt"));

  const fs::path skip = kRoot / "run_skip";
  REQUIRE(run(base + skip.string() + " --skip-boundary").code == 0);
  const auto skipped = train::load_model(skip / "model.ckpt");
  CHECK(skipped.cache->snapshots.size() == 1);
  CHECK(skipped.cache->skip_boundary);

  const fs::path fourier = kRoot / "run_fourier";
  REQUIRE(run(base + fourier.string() + " --encoder fourier").code == 0);
  const auto fm = train::load_model(fourier / "model.ckpt");
  CHECK(fm.field->config().encoder == field::EncoderKind::FourierMlp);
  CHECK(fm.cache->snapshots.size() == 2);
  CHECK(run(base + fourier.string() + " --encoder sideways").code == 2);
}

TEST_CASE("render: static scene at t=1, snapshots at supervised times, determinism, range") {
  Fixture f;
  const fs::path out = kRoot / "run_render";
  REQUIRE(run("train --dataset " + f.data.string() + " --config " + f.cfg.string() + " --out " + out.string()).code == 0);
  const auto model = train::load_model(out / "model.ckpt");
  const auto ds = load_dataset(f.data);
  splat::RenderSettings rs;
  rs.background = ds.background;
  rs.dilation = ds.dilation;

  const std::string base =
      "render --checkpoint " + (out / "model.ckpt").string() + " --dataset " + f.data.string() + " --camera 1 ";
  REQUIRE(run(base + "--t 1 --out " + (kRoot / "r1.png").string()).code == 0);
  CHECK(read_png(kRoot / "r1.png") == read_png_roundtrip(splat::render(model.scene, ds.cameras[1], rs)));

  // t = 0 is the last supervised time: the cached snapshot
  GaussianSet snap = model.scene;
  model.cache->snapshots.back().scatter(snap);
  REQUIRE(run(base + "--t 0 --out " + (kRoot / "r0.png").string()).code == 0);
  CHECK(read_png(kRoot / "r0.png") == read_png_roundtrip(splat::render(snap, ds.cameras[1], rs)));

  REQUIRE(run(base + "--t 0.3 --out " + (kRoot / "a.png").string()).code == 0);
  REQUIRE(run(base + "--t 0.3 --out " + (kRoot / "b.png").string()).code == 0);
  CHECK(slurp(kRoot / "a.png") == slurp(kRoot / "b.png"));

  CHECK(run(base + "--t 1.5 --out " + (kRoot / "c.png").string()).code == 2);
  CHECK(run(base + "--t -0.1 --out " + (kRoot / "c.png").string()).code == 2);
  CHECK(!fs::exists(kRoot / "c.png"));
}

TEST_CASE("eval: sections, CD column only with ground truth") {
  Fixture f;
  const fs::path out = kRoot / "run_eval";
  REQUIRE(run("train --dataset " + f.data.string() + " --config " + f.cfg.string() + " --out " + out.string()).code == 0);
  const std::string ckpt = (out / "model.ckpt").string();
  REQUIRE(run("eval --checkpoint " + ckpt + " --dataset " + f.data.string() + " --out " + (kRoot / "rep").string()).code == 0);
  auto j = nlohmann::json::parse(slurp(kRoot / "rep.json"));
  CHECK(j.contains("training"));
  CHECK(j.contains("interpolation"));
  CHECK(j.contains("combined"));
  CHECK(j["combined"].contains("cd"));
  // 3 timesteps, 2 held-out cameras, last timestep excluded
  CHECK(j["rows"].size() == 4);
  for (const auto& row : j["rows"]) CHECK(row["timestep"].get<int>() != 2);

  const fs::path no_gt = kRoot / "data_no_gt";
  fs::remove_all(no_gt);
  fs::copy(f.data, no_gt, fs::copy_options::recursive);
  fs::remove(no_gt / "ground_truth.json");
  REQUIRE(run("eval --checkpoint " + ckpt + " --dataset " + no_gt.string() + " --out " + (kRoot / "rep2").string()).code == 0);
  auto j2 = nlohmann::json::parse(slurp(kRoot / "rep2.json"));
  CHECK(!j2["combined"].contains("cd"));
  CHECK(j2["combined"]["psnr_db"].get<double>() == j["combined"]["psnr_db"].get<double>());
  CHECK(slurp(kRoot / "rep2.tsv").find("\tcd") == std::string::npos);
}

TEST_CASE("track and slice on a zero field") {
  Fixture f;
  // the skip-boundary checkpoint holds the zero-initialized field
  const fs::path out = kRoot / "run_zero";
  const std::string base = "train --dataset " + f.data.string() + " --config " + f.cfg.string() + " --out " + out.string();
  REQUIRE(run(base + " --stage static").code == 0);
  REQUIRE(run(base + " --stage boundary --skip-boundary").code == 0);
  const std::string ckpt = (out / "boundary.ckpt").string();

  auto r = run("track --checkpoint " + ckpt + " --out " + (kRoot / "tr.json").string() + " --count 100 --times 5");
  REQUIRE(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  auto tr = nlohmann::json::parse(slurp(kRoot / "tr.json"));
  CHECK(tr["times"].size() == 5);
  CHECK(tr["tracks"].size() == 4);
  for (const auto& track : tr["tracks"]) {
    for (const auto& p : track["positions"]) {
      for (int d = 0; d < 3; ++d) CHECK(p[d].get<double>() == doctest::Approx(track["positions"][0][d].get<double>()).epsilon(1e-12));
    }
  }
  CHECK(run("track --checkpoint " + ckpt + " --out " + (kRoot / "tr2.json").string() + " --times 0.5,1.2").code == 2);

  REQUIRE(run("slice --checkpoint " + ckpt + " --dataset " + f.data.string() + " --camera 2 --column 7 --out " +
              (kRoot / "slice.png").string())
              .code == 0);
  const Image s = read_png(kRoot / "slice.png");
  CHECK(s.width() == 3);
  CHECK(s.height() == 16);
  for (int r2 = 0; r2 < s.height(); ++r2)
    for (int c = 1; c < s.width(); ++c)
      for (int ch = 0; ch < 3; ++ch) CHECK(s.at(r2, c, ch) == s.at(r2, 0, ch));
  CHECK(run("slice --checkpoint " + ckpt + " --dataset " + f.data.string() + " --camera 2 --column 16 --out " +
            (kRoot / "slice2.png").string())
            .code == 2);
}
