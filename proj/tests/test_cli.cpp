#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kBin = STC_BIN;

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("stc_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string path(const std::string& rel) const { return (dir / rel).string(); }
};

int run(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = kBin + " " + args + " > " + log + " 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void gen_tiny(const Sandbox& sb, const std::string& out, int seed = 5) {
  const int rc = run("gen-data --out " + sb.path(out) +
                     " --n-train 24 --n-dev 8 --n-test 8 --letters 5 --feat-dim 4"
                     " --noise-sigma 0.2 --min-len 2 --max-len 4 --seed " +
                     std::to_string(seed));
  REQUIRE(rc == 0);
}

void train_tiny(const Sandbox& sb, const std::string& data, const std::string& ckpt,
                const std::string& which) {
  const int rc = run("train-" + which + " --data " + sb.path(data) + " --out " + sb.path(ckpt) +
                     " --layers 1 --hidden 6 --embed 4 --pool '' --set epochs=1 --set seed=3");
  REQUIRE(rc == 0);
}

}  // namespace

TEST_CASE("gen-data is deterministic and writes a manifest") {
  Sandbox sb;
  gen_tiny(sb, "a");
  gen_tiny(sb, "b");
  CHECK(slurp(sb.path("a/train.txt")) == slurp(sb.path("b/train.txt")));
  CHECK(slurp(sb.path("a/train.feats")) == slurp(sb.path("b/train.feats")));
  CHECK(slurp(sb.path("a/test.txt")) == slurp(sb.path("b/test.txt")));

  auto manifest = nlohmann::json::parse(slurp(sb.path("a/manifest.json")));
  CHECK(manifest.at("command") == "gen-data");
  CHECK(manifest.contains("config_hash"));
  CHECK(manifest.at("seed") == 5);

  // a different seed changes the corpus
  gen_tiny(sb, "c", 6);
  CHECK(slurp(sb.path("a/train.txt")) != slurp(sb.path("c/train.txt")));
}

TEST_CASE("gen-data honours the frames-per-letter range") {
  Sandbox sb;
  const int rc = run("gen-data --out " + sb.path("f") +
                     " --n-train 4 --n-dev 2 --n-test 2 --letters 5 --feat-dim 4"
                     " --noise-sigma 0.1 --min-len 2 --max-len 4"
                     " --frames-min 3 --frames-max 3 --seed 9");
  REQUIRE(rc == 0);
  auto task = nlohmann::json::parse(slurp(sb.path("f/task.json")));
  CHECK(task.at("frames_min") == 3);
  CHECK(task.at("frames_max") == 3);

  // invalid range fails fast
  CHECK(run("gen-data --out " + sb.path("g") +
            " --n-train 4 --n-dev 2 --n-test 2 --letters 5"
            " --frames-min 4 --frames-max 2 --seed 9") != 0);
}

TEST_CASE("training is seed deterministic end to end") {
  Sandbox sb;
  gen_tiny(sb, "data");
  train_tiny(sb, "data", "asr1.ckpt", "asr");
  train_tiny(sb, "data", "asr2.ckpt", "asr");
  CHECK(slurp(sb.path("asr1.ckpt")) == slurp(sb.path("asr2.ckpt")));
  CHECK(fs::exists(sb.path("asr1_log.txt")));
  CHECK(fs::exists(sb.path("asr1_log.json")));
}

TEST_CASE("cascade decode equals separate asr and mt passes") {
  Sandbox sb;
  gen_tiny(sb, "data");
  train_tiny(sb, "data", "asr.ckpt", "asr");
  train_tiny(sb, "data", "mt.ckpt", "mt");
  REQUIRE(run("build-cascade --asr " + sb.path("asr.ckpt") + " --mt " + sb.path("mt.ckpt") +
              " --out " + sb.path("cascade.ckpt")) == 0);

  // one-hot tight decode of the cascade
  REQUIRE(run("decode --model " + sb.path("cascade.ckpt") + " --data " + sb.path("data/test") +
              " --out-dir " + sb.path("dec_cascade") + " --beam 2 --max-len 12") == 0);

  // two independent passes: asr transcripts, then mt on those transcripts
  REQUIRE(run("decode --model " + sb.path("asr.ckpt") + " --data " + sb.path("data/test") +
              " --out-dir " + sb.path("dec_asr") + " --beam 2 --max-len 12") == 0);
  const std::string transcripts = slurp(sb.path("dec_asr/hyp.transcript.txt"));
  CHECK(slurp(sb.path("dec_cascade/hyp.transcript.txt")) == transcripts);

  CHECK(fs::exists(sb.path("dec_cascade/hyp.translation.txt")));
  CHECK(fs::exists(sb.path("dec_cascade/ref.translation.txt")));
  CHECK(fs::exists(sb.path("dec_cascade/manifest.json")));
}

TEST_CASE("evaluate prints one line per metric") {
  Sandbox sb;
  {
    std::ofstream ref(sb.path("ref.txt"));
    ref << "a b c\na b\n";
    std::ofstream hyp(sb.path("hyp.txt"));
    hyp << "a b c\na x\n";
  }
  const std::string log = sb.path("eval.log");
  REQUIRE(run("evaluate --ref " + sb.path("ref.txt") + " --hyp " + sb.path("hyp.txt") +
              " --metric all", log) == 0);
  const std::string out = slurp(log);
  CHECK(out.find("wer 0.2") != std::string::npos);  // 1 edit / 5 ref tokens
  CHECK(out.find("bleu ") != std::string::npos);
  CHECK(out.find("ter ") != std::string::npos);

  // mismatched line counts fail fast
  {
    std::ofstream hyp(sb.path("hyp.txt"), std::ios::trunc);
    hyp << "a b c\n";
  }
  CHECK(run("evaluate --ref " + sb.path("ref.txt") + " --hyp " + sb.path("hyp.txt") +
            " --metric wer", log) != 0);
}

TEST_CASE("gamma-sweep writes the aligned table and its json twin") {
  Sandbox sb;
  gen_tiny(sb, "data");
  train_tiny(sb, "data", "asr.ckpt", "asr");
  train_tiny(sb, "data", "mt.ckpt", "mt");
  REQUIRE(run("build-cascade --asr " + sb.path("asr.ckpt") + " --mt " + sb.path("mt.ckpt") +
              " --out " + sb.path("cascade.ckpt")) == 0);
  REQUIRE(run("gamma-sweep --model " + sb.path("cascade.ckpt") + " --data " +
              sb.path("data/test") + " --out-dir " + sb.path("sweep") +
              " --gammas 1 2 --beam 2 --max-len 12") == 0);
  const std::string table = slurp(sb.path("sweep/gamma_sweep.txt"));
  CHECK(table.find("gamma") != std::string::npos);
  CHECK(table.find("bleu") != std::string::npos);
  auto j = nlohmann::json::parse(slurp(sb.path("sweep/gamma_sweep.json")));
  CHECK(j.at("rows").size() == 2);
}

TEST_CASE("unknown config keys fail fast with a nonzero exit") {
  Sandbox sb;
  gen_tiny(sb, "data");
  const std::string log = sb.path("err.log");
  const int rc = run("train-asr --data " + sb.path("data") + " --out " + sb.path("x.ckpt") +
                     " --set learning_rate=0.1", log);
  CHECK(rc != 0);
  CHECK(slurp(log).find("unknown key") != std::string::npos);
}
