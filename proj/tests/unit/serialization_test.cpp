#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "mogphmm/serialization.hpp"

using namespace mogphmm;

TEST(TreeJson, RoundTripRandomTrees)
{
    Rng rng(51);
    TreeGenConfig const gen;
    for (int i = 0; i < 500; ++i) {
        GpTree const t = generate_tree(4, i % 2 ? GrowMode::Full : GrowMode::Grow, gen, rng);
        ASSERT_EQ(tree_from_json(Json::parse(tree_to_json(t).dump())), t);
    }
}

TEST(TreeJson, Layout)
{
    GpTree const t = GpTree::make(NodeKind::Add, GpTree::leaf(Node::feature_ref(2)), GpTree::leaf(Node::constant(0.5)));
    EXPECT_EQ(tree_to_json(t).dump(),
              R"({"children":[{"index":2,"kind":"feature"},{"kind":"constant","value":0.5}],"kind":"add"})");
}

TEST(TreeJson, Malformed)
{
    EXPECT_THROW(tree_from_json(Json::parse(R"({"kind":"pow"})")), Error);
    EXPECT_THROW(tree_from_json(Json::parse(R"({"kind":"add","children":[{"kind":"feature","index":0}]})")), Error);
    EXPECT_THROW(tree_from_json(Json::parse(R"({"kind":"feature"})")), Error);
}

TEST(ClassifierJson, RoundTripIsBitExact)
{
    BinaryClassifier const c{GpTree::make(NodeKind::AnalyticQuotient, GpTree::leaf(Node::feature_ref(0)),
                                          GpTree::leaf(Node::constant(0.1 + 0.2))),
                             1.0 / 3.0, 0.0125, 4, kDefaultResponseSentinel,
                             FeatureScaling{{5000.5, 0.1, 3.0}, {1234.567, 1.0 / 7.0, 2.0}}};
    auto const back = classifier_from_json(Json::parse(to_json(c).dump()));
    EXPECT_EQ(back, c);
}

TEST(CascadeJson, VersionChecked)
{
    CascadeClassifier const c({{GpTree{}, 0.0, 0.1, 2}, {GpTree{}, 1.0, 0.2, 1}});
    Json j = to_json(c);
    EXPECT_EQ(j.at("M"), 3);
    EXPECT_EQ(cascade_from_json(j), c);
    j["version"] = 99;
    EXPECT_THROW(cascade_from_json(j), DataError);
}

TEST(HmmJson, RoundTrip)
{
    HmmModel h{2, 3, {0.25, 0.75}, Matrix(2, 2, 0.5), Matrix(2, 3, 1.0 / 3.0), 1e-3};
    EXPECT_EQ(hmm_from_json(Json::parse(to_json(h).dump())), h);
    Json j = to_json(h);
    j["B"][1] = Json::array({0.5, 0.5});
    EXPECT_THROW(hmm_from_json(j), DataError);
}

TEST(ConfigJson, DefaultsAndOverrides)
{
    ExperimentConfig const defaults;
    EXPECT_EQ(to_json(experiment_config_from_json(Json::object())), to_json(defaults));
    auto const c = experiment_config_from_json(Json::parse(R"({"evolution":{"population_size":30},"folds":4})"));
    EXPECT_EQ(c.evolution.population_size, 30u);
    EXPECT_EQ(c.folds, 4u);
    EXPECT_EQ(c.samples_per_class, defaults.samples_per_class);
    EXPECT_EQ(to_json(experiment_config_from_json(to_json(c))), to_json(c));
}

TEST(ConfigJson, InvalidValues)
{
    EXPECT_THROW(experiment_config_from_json(Json::parse(R"({"folds":"ten"})")), ConfigError);
    EXPECT_THROW(experiment_config_from_json(Json::parse(R"({"folds":1})")), ConfigError);
    EXPECT_THROW(experiment_config_from_json(Json::parse(R"({"label_rule":{"thresholds":[5,1]}})")), ConfigError);
    EXPECT_THROW(experiment_config_from_json(Json::parse("[1,2]")), ConfigError);
}

TEST(JsonFiles, ReadWrite)
{
    auto const path = std::filesystem::temp_directory_path() / "mogphmm_serialization_test.json";
    Json const j{{"a", 1}};
    write_json_file(j, path);
    EXPECT_EQ(read_json_file(path), j);
    std::filesystem::remove(path);
    EXPECT_THROW(read_json_file(path), DataError);
}
