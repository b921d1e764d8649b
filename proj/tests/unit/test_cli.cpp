#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "toxdebias/text_io.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& dir) {
  const std::string cmd = "cd '" + dir.string() + "' && '" TOXDEBIAS_CLI "' " + args + " >out.txt 2>err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch() {
  static int counter = 0;
  auto p = fs::temp_directory_path() / ("toxdebias_cli_" + std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  const auto dir = scratch();
  CHECK(run("", dir) == 1);
  CHECK(run("no-such-command", dir) == 1);
  CHECK(run("train --epochs nope", dir) == 1);
  CHECK(run("select-region --coords c.tsv --in d.jsonl --region hard --fraction 2 --out m.json", dir) != 0);
  CHECK(run("--help", dir) == 0);
}

TEST_CASE("data errors exit with 2") {
  const auto dir = scratch();
  CHECK(run("ingest --in missing.jsonl --out x.jsonl", dir) == 2);
  toxdebias::write_file(dir / "bad.jsonl", "{\"id\": \"a\", \"text\": 3}\n");
  CHECK(run("ingest --in bad.jsonl --out x.jsonl", dir) == 2);
  CHECK(toxdebias::read_file(dir / "err.txt").find("line 1") != std::string::npos);
}

TEST_CASE("print-config shows resolved values and does nothing else") {
  const auto dir = scratch();
  CHECK(run("--print-config train --in d.jsonl --out m.bin --epochs 9", dir) == 0);
  const auto j = nlohmann::json::parse(toxdebias::read_file(dir / "out.txt"));
  CHECK(j.dump().find("\"epochs\":9") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "m.bin"));
}

TEST_CASE("remote backend refuses without acknowledgement") {
  const auto dir = scratch();
  REQUIRE(run("synth --kind dialect --out-dir s --n-train 40 --n-test 10", dir) == 0);
  CHECK(run("translate --in s/train.jsonl --backend remote_completion --cache t.tsv", dir) == 1);
  CHECK(toxdebias::read_file(dir / "err.txt").find("--i-understand-the-limitations") != std::string::npos);
}

TEST_CASE("small pipeline runs end to end") {
  const auto dir = scratch();
  REQUIRE(run("synth --kind dialect --out-dir s --n-train 300 --n-test 100 --seed 3", dir) == 0);
  CHECK(run("train --in s/train.jsonl --out m.bin --dynamics dyn.jsonl --epochs 3 --dim-bits 12", dir) == 0);
  CHECK(fs::exists(dir / "m.bin.config.json"));
  CHECK(run("eval --model m.bin --in s/test.jsonl --out p.jsonl", dir) == 0);
  CHECK(run("cartography --dynamics dyn.jsonl --out coords.tsv", dir) == 0);
  CHECK(run("select-region --coords coords.tsv --in s/train.jsonl --region hard --out hard.json --subset-out hard.jsonl", dir) == 0);
  CHECK(run("translate --in s/train.jsonl --backend file_lookup --lookup s/translations.tsv --cache t.tsv", dir) == 0);
  CHECK(run("relabel --in s/train.jsonl --translations t.tsv --vanilla m.bin --out r.jsonl --decisions d.jsonl", dir) == 0);
  CHECK(run("report --preds p.jsonl --in s/test.jsonl --lexicon s/lexicon.csv --name v --out rep.json --markdown rep.md", dir) == 0);
  const auto rep = nlohmann::json::parse(toxdebias::read_file(dir / "rep.json"));
  CHECK(rep.contains("accuracy"));
  fs::remove_all(dir);
}
