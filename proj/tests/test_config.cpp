#include "chnst/config.hpp"

#include <gtest/gtest.h>

using namespace chnst;

namespace {

void expect_parse_error(const std::string& text, std::size_t line, std::size_t column) {
    try {
        config::parse(text);
        FAIL() << "expected ParseError for:\n" << text;
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), line) << e.what();
        EXPECT_EQ(e.column(), column) << e.what();
    }
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
    const auto c = config::parse("");
    EXPECT_EQ(c.run.base, 8);
    EXPECT_EQ(c.run.level, 0);
    EXPECT_EQ(c.run.c_tau, 1e-3);
    EXPECT_FALSE(c.run.tau.has_value());
    EXPECT_EQ(c.run.model.gamma, 1e-3);
    EXPECT_EQ(c.run.model.mobility.l11, 1e-2);
    EXPECT_EQ(c.run.star_rule, scheme::StarRule::old_level);
    EXPECT_EQ(c.model_name, "chnst-default");
    EXPECT_TRUE(c.write_csv);
    EXPECT_FALSE(c.write_vtk);
    EXPECT_EQ(c.converge_levels, 3);
    EXPECT_EQ(c.eoc_gate, 1.5);
}

TEST(Config, FullFile) {
    const auto c = config::parse(R"(# comment
[mesh]
base = 16   ; trailing comment
level = 1

[time]
tau = 2.5e-4
T = 0.01
steps = 12

[model]
name = chnst-default
gamma = 2e-3
mobility = 0.5
mobility_cross = 0.1
viscosity_base = 0.01
viscosity_slope = 0.5

[scheme]
star_rule = new
newton_tol = 1e-11
newton_max_iter = 30
quad_degree = 8
theta_floor = 1e-6

[output]
directory = out/dir
snapshot_stride = 5
formats = csv, vtk ,raw

[converge]
levels = 4
eoc_gate = 1.8
)");
    EXPECT_EQ(c.run.base, 16);
    EXPECT_EQ(c.run.level, 1);
    EXPECT_EQ(*c.run.tau, 2.5e-4);
    EXPECT_EQ(*c.run.final_time, 0.01);
    EXPECT_EQ(*c.run.steps, 12);
    EXPECT_EQ(c.run.model.gamma, 2e-3);
    EXPECT_EQ(c.run.model.mobility.l11, 0.5);
    EXPECT_EQ(c.run.model.mobility.l22, 0.5);
    EXPECT_EQ(c.run.model.mobility.l12, 0.1);
    EXPECT_EQ(c.run.model.viscosity_base, 0.01);
    EXPECT_EQ(c.run.model.viscosity_slope, 0.5);
    EXPECT_EQ(c.run.star_rule, scheme::StarRule::new_level);
    EXPECT_EQ(c.run.newton.tolerance, 1e-11);
    EXPECT_EQ(c.run.newton.max_iterations, 30);
    EXPECT_EQ(c.run.quad_degree, 8);
    EXPECT_EQ(c.run.theta_floor, 1e-6);
    EXPECT_EQ(c.output_directory, "out/dir");
    EXPECT_EQ(c.snapshot_stride, 5);
    EXPECT_TRUE(c.write_csv && c.write_vtk && c.write_raw);
    EXPECT_EQ(c.converge_levels, 4);
    EXPECT_EQ(c.eoc_gate, 1.8);
}

TEST(Config, FormatsReplaceDefault) {
    const auto c = config::parse("[output]\nformats = vtk\n");
    EXPECT_FALSE(c.write_csv);
    EXPECT_TRUE(c.write_vtk);
}

TEST(Config, ErrorsCarryLineAndColumn) {
    expect_parse_error("[mesh]\nbsae = 8\n", 2, 1);
    expect_parse_error("[mesh]\n  base = eight\n", 2, 10);
    expect_parse_error("[mesh]\nbase = 8\nbase = 16\n", 3, 1);
    expect_parse_error("[meshes]\n", 1, 2);
    expect_parse_error("[mesh\n", 1, 1);
    expect_parse_error("base = 8\n", 1, 1);
    expect_parse_error("[mesh]\nbase 8\n", 2, 1);
    expect_parse_error("[mesh]\nbase =\n", 2, 7);
    expect_parse_error("[mesh]\nlevel = 1.5\n", 2, 9);
    expect_parse_error("[model]\nname = other\n", 2, 8);
    expect_parse_error("[scheme]\nstar_rule = middle\n", 2, 13);
    expect_parse_error("[output]\nformats = csv, png\n", 2, 16);
    expect_parse_error("[time]\ntau = 1e-3x\n", 2, 7);
}

TEST(Config, SameKeyInDifferentSections) {
    EXPECT_THROW(config::parse("[time]\nbase = 8\n"), ParseError);
    EXPECT_NO_THROW(config::parse("[mesh]\nbase = 8\n[time]\nsteps = 3\n[mesh]\nlevel = 1\n"));
}

TEST(Config, MissingFile) {
    try {
        config::load("/nonexistent/dir/config.ini");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 0u);
    }
}
