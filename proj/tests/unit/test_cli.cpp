#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "hcner/corpus.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kSmall =
    " --word-dim 16 --hidden-main 16 --hidden-sent 8 --set char_dim=8 --set init_filters=8"
    " --set block_filters=4 --set layers=3";

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HCNER_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Workdir {
  fs::path dir;
  explicit Workdir(const std::string& name) : dir(fs::temp_directory_path() / ("hcner-cli-" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  fs::path operator/(const std::string& f) const { return dir / f; }
};

}  // namespace

TEST_CASE("usage errors exit with 1") {
  Workdir w("usage");
  const fs::path fx = HCNER_FIXTURE_DIR;
  CHECK(run("train --no-such-flag", w / "log") == 1);
  CHECK(run("train --train " + (fx / "italy.conll").string() + " --epochs 1", w / "log") == 1);
  CHECK(slurp(w / "log").find("embeddings") != std::string::npos);
  CHECK(run("train --train " + (fx / "italy.conll").string() + " --attn-kernel 4 --random-embeddings",
            w / "log") == 1);
}

TEST_CASE("data errors exit with 2") {
  Workdir w("data");
  std::ofstream(w / "bad.conll") << "Rome B-LOC\nis\n";
  CHECK(run("train --random-embeddings --train " + (w / "bad.conll").string(), w / "log") == 2);
  std::ofstream(w / "bad_tag.conll") << "Rome B-LOC\nis X-LOC\n";
  CHECK(run("train --random-embeddings --train " + (w / "bad_tag.conll").string(), w / "log") == 2);
  CHECK(run("eval --checkpoint " + (w / "missing.ckpt").string() + " --data " + (w / "bad.conll").string(),
            w / "log") == 2);
}

TEST_CASE("train writes per-epoch metrics reproducibly; predict emits BIO") {
  Workdir w("train");
  REQUIRE(run("synth --out-dir " + w.dir.string() + " --train-size 40 --dev-size 10 --test-size 10 --embedding-dim 16",
              w / "log") == 0);
  const std::string data = " --train " + (w / "train.txt").string() + " --dev " + (w / "dev.txt").string() +
                           " --test " + (w / "test.txt").string() + " --embeddings " +
                           (w / "embeddings.txt").string() + kSmall + " --epochs 2 --seed 5";
  REQUIRE(run("train --out-dir " + (w / "a").string() + data, w / "log") == 0);
  REQUIRE(run("train --out-dir " + (w / "b").string() + data, w / "log") == 0);
  const std::string metrics = slurp(w / "a" / "metrics.txt");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 2);
  CHECK(metrics == slurp(w / "b" / "metrics.txt"));
  CHECK(slurp(w / "a" / "test_metrics.txt") == slurp(w / "b" / "test_metrics.txt"));
  CHECK(slurp(w / "a" / "model.ckpt") == slurp(w / "b" / "model.ckpt"));
  CHECK(slurp(w / "a" / "manifest.txt").find("seed=5") != std::string::npos);

  REQUIRE(run("predict --checkpoint " + (w / "a" / "model.ckpt").string() + " --input " +
                  (w / "test.txt").string() + " --output " + (w / "pred.txt").string(),
              w / "log") == 0);
  const hcner::Corpus pred = hcner::read_conll((w / "pred.txt").string());
  CHECK(pred.size() == 10);
  for (const auto& s : pred.sentences) {
    std::vector<std::string> tags;
    for (const auto& t : s.tokens) tags.push_back(t.tag);
    CHECK_NOTHROW(hcner::validate_tags(tags, hcner::TagScheme::BIO));
  }

  std::ofstream(w / "plain.txt") << "Nobody visits anywhere\n\nRome again\n";
  REQUIRE(run("predict --plain --checkpoint " + (w / "a" / "model.ckpt").string() + " --input " +
                  (w / "plain.txt").string(),
              w / "out") == 0);
  const std::string tagged = slurp(w / "out");
  CHECK(std::count(tagged.begin(), tagged.end(), '\n') == 7);

  REQUIRE(run("eval --checkpoint " + (w / "a" / "model.ckpt").string() + " --data " + (w / "test.txt").string() +
                  " --metrics " + (w / "eval.txt").string(),
              w / "log") == 0);
  CHECK(slurp(w / "eval.txt").find("f1=") != std::string::npos);
}

TEST_CASE("inspect-memory lists one slot per training occurrence") {
  Workdir w("inspect");
  const fs::path fx = HCNER_FIXTURE_DIR;
  REQUIRE(run("train --random-embeddings --epochs 1 --out-dir " + w.dir.string() + " --train " +
                  (fx / "italy.conll").string() + kSmall,
              w / "log") == 0);
  REQUIRE(run("inspect-memory --checkpoint " + (w / "model.ckpt").string() + " Italy", w / "out") == 0);
  const std::string out = slurp(w / "out");
  CHECK(out.rfind("Italy: [1, 7, 11]", 0) == 0);
  CHECK(std::count(out.begin(), out.end(), '\n') == 4);
  REQUIRE(run("inspect-memory --checkpoint " + (w / "model.ckpt").string() + " Atlantis", w / "out") == 0);
  CHECK(slurp(w / "out") == "Atlantis: no slots\n");
}
