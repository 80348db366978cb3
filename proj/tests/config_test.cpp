#include <gtest/gtest.h>

#include <random>
#include <string>

#include "fab/config/compile.hpp"
#include "fab/config/profile.hpp"
#include "fab/config/schema.hpp"
#include "fab/config/template.hpp"
#include "fab/config/value.hpp"

using namespace fab;
using namespace fab::config;

namespace {

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

TemplateSet make_set(std::initializer_list<const char*> sources) {
  TemplateSet set;
  for (const char* src : sources) set.add_source(src);
  return set;
}

// ---- template parsing ------------------------------------------------------

TEST(ParseTemplate, EmptyObjectTemplate) {
  TemplateSource tpl = parse_template("object node001;");
  EXPECT_EQ(tpl.name, "node001");
  EXPECT_EQ(tpl.kind, TemplateSource::Kind::Object);
  EXPECT_TRUE(tpl.statements.empty());
  EXPECT_TRUE(tpl.includes.empty());
}

TEST(ParseTemplate, SingleAssign) {
  TemplateSource tpl = parse_template("object n1; '/cluster/name' = 'lxbatch';");
  ASSERT_EQ(tpl.statements.size(), 1u);
  EXPECT_EQ(tpl.statements[0].mode, Statement::Mode::Assign);
  EXPECT_EQ(tpl.statements[0].path.str(), "/cluster/name");
  EXPECT_EQ(tpl.statements[0].value.as_string(), "lxbatch");
}

TEST(ParseTemplate, TruncatedInputFailsAtLineOne) {
  try {
    parse_template("object n1; '/a' = ");
    FAIL() << "expected syntax error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "SYNTAX");
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(ParseTemplate, StatementKindsAndComments) {
  TemplateSource tpl = parse_template(
      "# host template\n"
      "object n1;\n"
      "include common;  # pulls in defaults\n"
      "'/a/b' = 7;\n"
      "'/a/c' := [1, 2, 3];\n"
      "delete '/a/d';\n"
      "'/s' = 'it''s quoted';\n"
      "'/flags' = { verbose = true, retries = 2 };\n");
  ASSERT_EQ(tpl.includes.size(), 1u);
  EXPECT_EQ(tpl.includes[0].name, "common");
  ASSERT_EQ(tpl.statements.size(), 5u);
  EXPECT_EQ(tpl.statements[1].mode, Statement::Mode::Override);
  EXPECT_EQ(tpl.statements[2].mode, Statement::Mode::Delete);
  EXPECT_EQ(tpl.statements[3].value.as_string(), "it's quoted");
  EXPECT_EQ(tpl.statements[4].value.as_record().at("retries").as_integer(), 2);
  EXPECT_EQ(tpl.statements[0].line, 4);
}

TEST(ParseTemplate, ConditionalAssignIsRejected) {
  EXPECT_EQ(error_code([] { parse_template("object n1; '/a' ?= 1;"); }),
            "SYNTAX");
}

TEST(ParseTemplate, MalformedPath) {
  EXPECT_EQ(error_code([] { parse_template("object n1; 'a/b' = 1;"); }),
            "MALFORMED_PATH");
  EXPECT_EQ(error_code([] { parse_template("object n1; '/A/b' = 1;"); }),
            "MALFORMED_PATH");
  EXPECT_EQ(error_code([] { parse_template("object n1; '//x' = 1;"); }),
            "MALFORMED_PATH");
}

TEST(ParseTemplate, DuplicateNamesRejectedInSet) {
  TemplateSet set;
  set.add_source("include a; '/x' = 1;");
  EXPECT_EQ(error_code([&] { set.add_source("include a; '/y' = 2;"); }),
            "DUPLICATE_TEMPLATE");
}

// ---- compilation -----------------------------------------------------------

TEST(Compile, EmptyObjectTemplate) {
  TemplateSet set = make_set({"object n1;"});
  ProfileTree tree = compile_profile(set, "n1");
  EXPECT_EQ(tree.generation, 1);
  EXPECT_TRUE(tree.root.as_record().empty());
}

TEST(Compile, OverrideWinsOverIncludedAssign) {
  // precedence oracle: apply by hand, include first then the object's own
  // statement, so /a must end at 2
  TemplateSet set = make_set({
      "include defaults; '/a' = 1;",
      "object n1; include defaults; '/a' := 2;",
  });
  ProfileTree tree = compile_profile(set, "n1");
  const ConfigValue* v = query(tree, "/a");
  ASSERT_NE(v, nullptr);
  EXPECT_EQ(v->as_integer(), 2);
}

TEST(Compile, CollisionWithoutOverrideFails) {
  TemplateSet set = make_set({
      "include one; '/a' = 1;",
      "include two; '/a' = 2;",
      "object n1; include one; include two;",
  });
  try {
    compile_profile(set, "n1");
    FAIL() << "expected collision";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "ASSIGN_COLLISION");
    EXPECT_NE(std::string(e.what()).find("/a"), std::string::npos);
  }
}

TEST(Compile, IncludeChainAppliesDeepestFirst) {
  // A includes B includes C: C's statements apply before B's before A's,
  // probed with overrides at every level.
  TemplateSet set = make_set({
      "include c; '/probe' = 'c'; '/from_c' = 1;",
      "include b; include c; '/probe' := 'b'; '/from_b' = 1;",
      "object a; include b; '/probe' := 'a';",
  });
  ProfileTree tree = compile_profile(set, "a");
  EXPECT_EQ(query(tree, "/probe")->as_string(), "a");
  EXPECT_NE(query(tree, "/from_c"), nullptr);
  EXPECT_NE(query(tree, "/from_b"), nullptr);
}

TEST(Compile, DiamondIncludeExpandsOnce) {
  TemplateSet set = make_set({
      "include shared; '/s' = 1;",
      "include left; include shared;",
      "include right; include shared;",
      "object n1; include left; include right;",
  });
  // a second expansion would collide on /s
  ProfileTree tree = compile_profile(set, "n1");
  EXPECT_EQ(query(tree, "/s")->as_integer(), 1);
}

TEST(Compile, MissingTemplate) {
  TemplateSet set = make_set({"object n1; include ghost;"});
  EXPECT_EQ(error_code([&] { compile_profile(set, "n1"); }), "MISSING_TEMPLATE");
  EXPECT_EQ(error_code([&] { compile_profile(set, "n2"); }), "MISSING_TEMPLATE");
}

TEST(Compile, CyclicInclude) {
  TemplateSet set = make_set({
      "include a; include b;",
      "include b; include a;",
      "object n1; include a;",
  });
  EXPECT_EQ(error_code([&] { compile_profile(set, "n1"); }), "CYCLIC_INCLUDE");
}

TEST(Compile, DeleteRemovesSubtree) {
  TemplateSet set = make_set({
      "object n1; '/a/b' = 1; '/a/c' = 2; delete '/a/b'; delete '/nothing/here';",
  });
  ProfileTree tree = compile_profile(set, "n1");
  EXPECT_EQ(query(tree, "/a/b"), nullptr);
  EXPECT_NE(query(tree, "/a/c"), nullptr);
}

TEST(Compile, AssignThroughScalarCollides) {
  TemplateSet set = make_set({"object n1; '/a' = 1; '/a/b' = 2;"});
  EXPECT_EQ(error_code([&] { compile_profile(set, "n1"); }),
            "ASSIGN_COLLISION");
}

TEST(Compile, GenerationIsContentAddressed) {
  TemplateSet set = make_set({"object n1; '/a' = 1;"});
  ProfileTree g1 = compile_profile(set, "n1");
  EXPECT_EQ(g1.generation, 1);
  ProfileTree same = compile_profile(set, "n1", nullptr, &g1);
  EXPECT_EQ(same.generation, 1);

  TemplateSet changed = make_set({"object n1; '/a' = 2;"});
  ProfileTree g2 = compile_profile(changed, "n1", nullptr, &g1);
  EXPECT_EQ(g2.generation, 2);
}

TEST(Compile, DeterministicBytes) {
  auto build = [] {
    TemplateSet set = make_set({
        "include common; '/z' = 1; '/m' = [1, 'two', false];",
        "object n1; include common; '/a/x' = 'v'; '/a/y' = 2;",
    });
    return serialize_profile(compile_profile(set, "n1"));
  };
  EXPECT_EQ(build(), build());
}

// ---- serialization ---------------------------------------------------------

TEST(Serialize, EmptyProfileGoldenBytes) {
  ProfileTree tree;
  tree.node_name = "n1";
  tree.generation = 1;
  EXPECT_EQ(serialize_profile(tree),
            "profile n1 generation 1\n"
            "root record {\n"
            "}\n");
}

TEST(Serialize, NestedGoldenBytes) {
  TemplateSet set = make_set({
      "object node001; '/cluster/name' = 'lxbatch'; '/cluster/cpus' = 2;"
      " '/tags' = ['fast', 'new']; '/on' = true;",
  });
  ProfileTree tree = compile_profile(set, "node001");
  EXPECT_EQ(serialize_profile(tree),
            "profile node001 generation 1\n"
            "root record {\n"
            "  cluster record {\n"
            "    cpus integer 2\n"
            "    name string 'lxbatch'\n"
            "  }\n"
            "  on boolean true\n"
            "  tags list {\n"
            "    0 string 'fast'\n"
            "    1 string 'new'\n"
            "  }\n"
            "}\n");
}

TEST(Serialize, KeyInsertionOrderIrrelevant) {
  ConfigValue::Record r1;
  r1["b"] = ConfigValue(1);
  r1["a"] = ConfigValue(2);
  ConfigValue::Record r2;
  r2["a"] = ConfigValue(2);
  r2["b"] = ConfigValue(1);
  ProfileTree t1{"n", 1, ConfigValue(r1)};
  ProfileTree t2{"n", 1, ConfigValue(r2)};
  EXPECT_EQ(serialize_profile(t1), serialize_profile(t2));
}

// ---- parse / round trip ------------------------------------------------------

ConfigValue random_value(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> kind_pick(0, depth >= 3 ? 2 : 4);
  static const char* charset =
      "abcdefghijklmnopqrstuvwxyz0123456789 '#=_-{}[]";
  switch (kind_pick(rng)) {
    case 0: {
      std::uniform_int_distribution<int> len(0, 12);
      std::uniform_int_distribution<size_t> pick(0, 45);
      std::string s;
      int n = len(rng);
      for (int i = 0; i < n; ++i) s.push_back(charset[pick(rng)]);
      return ConfigValue(s);
    }
    case 1: {
      std::uniform_int_distribution<std::int64_t> v(-1000000, 1000000);
      return ConfigValue(v(rng));
    }
    case 2:
      return ConfigValue(rng() % 2 == 0);
    case 3: {
      std::uniform_int_distribution<int> len(0, 4);
      ConfigValue::List list;
      int n = len(rng);
      for (int i = 0; i < n; ++i) list.push_back(random_value(rng, depth + 1));
      return ConfigValue(list);
    }
    default: {
      std::uniform_int_distribution<int> len(0, 4);
      ConfigValue::Record rec;
      int n = len(rng);
      for (int i = 0; i < n; ++i) {
        rec["k" + std::to_string(rng() % 16)] = random_value(rng, depth + 1);
      }
      return ConfigValue(rec);
    }
  }
}

TEST(RoundTrip, RandomizedTrees) {
  std::mt19937 rng(20030324);
  for (int i = 0; i < 300; ++i) {
    ConfigValue::Record root;
    std::uniform_int_distribution<int> len(0, 5);
    int n = len(rng);
    for (int k = 0; k < n; ++k) {
      root["key" + std::to_string(rng() % 32)] = random_value(rng, 1);
    }
    ProfileTree tree{"node" + std::to_string(i % 7), i + 1, ConfigValue(root)};

    std::string bytes = serialize_profile(tree);
    ProfileTree parsed = parse_profile(bytes);
    EXPECT_EQ(parsed, tree) << bytes;
    EXPECT_EQ(serialize_profile(parsed), bytes);
  }
}

TEST(ParseProfile, EmptyInputIsMalformed) {
  EXPECT_EQ(error_code([] { parse_profile(""); }), "MALFORMED_DOCUMENT");
}

TEST(ParseProfile, UnknownKind) {
  EXPECT_EQ(error_code([] {
              parse_profile(
                  "profile n1 generation 1\n"
                  "root record {\n"
                  "  data blob 'xx'\n"
                  "}\n");
            }),
            "UNKNOWN_KIND");
}

TEST(ParseProfile, TrailingContentRejected) {
  EXPECT_EQ(error_code([] {
              parse_profile(
                  "profile n1 generation 1\n"
                  "root record {\n"
                  "}\n"
                  "}\n");
            }),
            "MALFORMED_DOCUMENT");
}

// ---- query ------------------------------------------------------------------

TEST(Query, MissingPathIsDistinctFromEmpty) {
  TemplateSet set = make_set({"object n1; '/empty' = {};"});
  ProfileTree tree = compile_profile(set, "n1");
  EXPECT_EQ(query(tree, "/a"), nullptr);
  const ConfigValue* v = query(tree, "/empty");
  ASSERT_NE(v, nullptr);
  EXPECT_TRUE(v->as_record().empty());
}

TEST(Query, ScalarAndSubtree) {
  TemplateSet set = make_set({"object n1; '/cluster/name' = 'lxbatch';"});
  ProfileTree tree = compile_profile(set, "n1");
  EXPECT_EQ(query(tree, "/cluster/name")->as_string(), "lxbatch");
  const ConfigValue* sub = query(tree, "/cluster");
  ASSERT_NE(sub, nullptr);
  EXPECT_EQ(sub->as_record().at("name").as_string(), "lxbatch");
}

// ---- schema -----------------------------------------------------------------

TEST(Schema, EmptySchemaAcceptsAnything) {
  TemplateSet set = make_set({"object n1; '/whatever' = 1;"});
  ProfileTree tree = compile_profile(set, "n1");
  GlobalSchema schema;
  EXPECT_TRUE(validate_schema(tree, schema).empty());
}

TEST(Schema, MissingRequiredPath) {
  TemplateSet set = make_set({"object n1;"});
  ProfileTree tree = compile_profile(set, "n1");
  GlobalSchema schema;
  schema.require("/hardware/cpus", ConfigValue::Kind::Integer);
  auto violations = validate_schema(tree, schema);
  ASSERT_EQ(violations.size(), 1u);
  EXPECT_EQ(violations[0].path.str(), "/hardware/cpus");
}

TEST(Schema, KindMismatch) {
  TemplateSet set = make_set({"object n1; '/hardware/cpus' = [1, 2];"});
  ProfileTree tree = compile_profile(set, "n1");
  GlobalSchema schema;
  schema.require("/hardware/cpus", ConfigValue::Kind::Record);
  auto violations = validate_schema(tree, schema);
  ASSERT_EQ(violations.size(), 1u);
  EXPECT_NE(violations[0].reason.find("record"), std::string::npos);
}

TEST(Schema, EnumerationEnforced) {
  TemplateSet set = make_set({"object n1; '/install/boot_method' = 'cdrom';"});
  ProfileTree tree = compile_profile(set, "n1");
  GlobalSchema schema;
  schema.require("/install/boot_method", ConfigValue::Kind::String,
                 {ConfigValue("floppy"), ConfigValue("kernel"),
                  ConfigValue("pxe")});
  EXPECT_EQ(validate_schema(tree, schema).size(), 1u);
}

TEST(Schema, CompileEnforcesRegisteredSchema) {
  TemplateSet set = make_set({"object n1;"});
  GlobalSchema schema;
  schema.require("/cluster/name", ConfigValue::Kind::String);
  EXPECT_EQ(error_code([&] { compile_profile(set, "n1", &schema); }),
            "SCHEMA_VIOLATION");
}

}  // namespace
