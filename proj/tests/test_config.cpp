// Copyright 2026 The tokstd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "tokstd/config.hpp"

namespace tokstd {
namespace {

TEST(Toml, ParsesScalarsTablesAndComments) {
  ConfigTable t = ParseToml(R"(
# comment
tau = 0.2
epochs = 600   # trailing comment
name = "a # b"
lit = 'x'
flag = true
big = 1_000
[model]
layers = 4
)");
  EXPECT_EQ(std::get<double>(t.at("tau")), 0.2);
  EXPECT_EQ(std::get<int64_t>(t.at("epochs")), 600);
  EXPECT_EQ(std::get<std::string>(t.at("name")), "a # b");
  EXPECT_EQ(std::get<std::string>(t.at("lit")), "x");
  EXPECT_TRUE(std::get<bool>(t.at("flag")));
  EXPECT_EQ(std::get<int64_t>(t.at("big")), 1000);
  EXPECT_EQ(std::get<int64_t>(t.at("model.layers")), 4);
}

TEST(Toml, ErrorsNameTheLine) {
  try {
    ParseToml("a = 1\nb = \n", "f.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("f.toml:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ParseToml("a = 1\na = 2\n"), Error);
  EXPECT_THROW(ParseToml("[bad\n"), Error);
  EXPECT_THROW(ParseToml("novalue\n"), Error);
  EXPECT_THROW(ParseToml("x = [1, 2]\n"), Error);
  EXPECT_THROW(ParseToml("x = \"open\n"), Error);
}

TEST(Overrides, InferTypes) {
  EXPECT_EQ(std::get<int64_t>(ParseOverride("epochs=3").second), 3);
  EXPECT_EQ(std::get<double>(ParseOverride("tau=0.5").second), 0.5);
  EXPECT_EQ(std::get<bool>(ParseOverride("flag=false").second), false);
  EXPECT_EQ(std::get<std::string>(ParseOverride("name=abc").second), "abc");
  EXPECT_EQ(ParseOverride(" model.layers = 2 ").first, "model.layers");
  EXPECT_THROW(ParseOverride("noequals"), Error);
  EXPECT_THROW(ParseOverride("k="), Error);
}

struct Demo {
  double tau = 0.2;
  int epochs = 600;
  uint64_t seed = 0;
  bool flag = false;
  std::string name = "d";
};

ConfigBinder BindDemo(Demo& d) {
  ConfigBinder b;
  b.bind("tau", &d.tau);
  b.bind("epochs", &d.epochs);
  b.bind("seed", &d.seed);
  b.bind("flag", &d.flag);
  b.bind("name", &d.name);
  return b;
}

TEST(Binder, PrecedenceOverrideBeatsFileBeatsDefault) {
  Demo d;
  ConfigBinder b = BindDemo(d);
  b.apply(ParseToml("tau = 0.3\nepochs = 10\n"), "file");
  auto [k, v] = ParseOverride("epochs=5");
  b.apply(k, v, "override");
  EXPECT_EQ(d.tau, 0.3);
  EXPECT_EQ(d.epochs, 5);
  EXPECT_EQ(d.seed, 0u);
  std::string log = b.describe();
  EXPECT_NE(log.find("epochs = 5  # override"), std::string::npos) << log;
  EXPECT_NE(log.find("tau = 0.29999999999999999  # file"), std::string::npos) << log;
  EXPECT_NE(log.find("seed = 0  # default"), std::string::npos) << log;
}

TEST(Binder, RejectsUnknownKeysAndTypeMismatch) {
  Demo d;
  ConfigBinder b = BindDemo(d);
  try {
    b.apply(ParseToml("tua = 0.3\n"), "file");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_TRUE(e.is_validation());
  }
  EXPECT_THROW(b.apply("epochs", ConfigScalar(1.5), "x"), Error);
  EXPECT_THROW(b.apply("flag", ConfigScalar(int64_t{1}), "x"), Error);
  EXPECT_THROW(b.apply("name", ConfigScalar(int64_t{1}), "x"), Error);
  EXPECT_THROW(b.apply("seed", ConfigScalar(int64_t{-1}), "x"), Error);
  EXPECT_THROW(b.apply("epochs", ConfigScalar(int64_t{1} << 40), "x"), Error);
  b.apply("tau", ConfigScalar(int64_t{1}), "x");
  EXPECT_EQ(d.tau, 1.0);
}

}  // namespace
}  // namespace tokstd
