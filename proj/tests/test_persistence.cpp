#include "drr/persistence.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace drr;

namespace {

std::string serialize(const AnyModel& m, const Metadata& meta = {})
{
    std::ostringstream out(std::ios::binary);
    save_model(m, out, meta);
    return out.str();
}

LoadedModel deserialize(const std::string& bytes)
{
    std::istringstream in(bytes, std::ios::binary);
    return load_model_with_meta(in);
}

DrrModel mixed_drr_model(const Matrix& X)
{
    DrrConfig cfg;
    cfg.krr.max_train = 150;
    cfg.krr.cv_max_rows = 80;
    cfg.first_residualized = 2;
    cfg.last_residualized = 3;
    DrrModel m = fit_drr(X, cfg);
    // Dimension 4 linear, dimension 5 left as zero.
    const Matrix A = pca_forward(m.pca, X);
    m.regressors[2] = fit_linear_regressor(A.leftCols(3), A.col(3));
    return m;
}

} // namespace

class PersistenceRoundTrip : public ::testing::Test {
protected:
    Matrix X = drr::test::curved_data(200, 5, 1);
    Matrix Q = drr::test::gaussian(60, 5, 2, 2.0);

    void expect_bitwise(const AnyModel& m)
    {
        const std::string bytes = serialize(m);
        const AnyModel back = deserialize(bytes).model;
        EXPECT_EQ(method_of(back), method_of(m));
        EXPECT_EQ(forward(back, Q), forward(m, Q));
        EXPECT_EQ(inverse(back, Q), inverse(m, Q));
        EXPECT_EQ(serialize(back), bytes);
    }
};

TEST_F(PersistenceRoundTrip, Pca) { expect_bitwise(fit_pca(X)); }

TEST_F(PersistenceRoundTrip, Ppa) { expect_bitwise(fit_ppa(X, 3)); }

TEST_F(PersistenceRoundTrip, DrrWithEveryRegressorKind)
{
    const DrrModel m = mixed_drr_model(X);
    expect_bitwise(m);
    const auto back = std::get<DrrModel>(deserialize(serialize(m)).model);
    ASSERT_EQ(back.regressors.size(), 4u);
    EXPECT_TRUE(std::holds_alternative<KrrModel>(back.regressors[0]));
    EXPECT_TRUE(std::holds_alternative<LinearRegressor>(back.regressors[2]));
    EXPECT_TRUE(std::holds_alternative<ZeroRegressor>(back.regressors[3]));
    EXPECT_EQ(std::get<KrrModel>(back.regressors[0]).sigma, std::get<KrrModel>(m.regressors[0]).sigma);
    EXPECT_TRUE(std::isnan(back.cv_mse[3]));
}

TEST_F(PersistenceRoundTrip, MetadataSurvives)
{
    const Metadata meta{{"seed", "42"}, {"note", "two words"}};
    const auto back = deserialize(serialize(fit_pca(X), meta));
    EXPECT_EQ(back.meta, meta);
}

TEST_F(PersistenceRoundTrip, FileOnDisk)
{
    drr::test::TempFile f("model");
    const AnyModel m = fit_ppa(X, 2);
    save_model(m, f.path());
    EXPECT_EQ(forward(load_model(f.path()), Q), forward(m, Q));
    EXPECT_THROW(load_model("/nonexistent/dir/model.drr"), Error);
}

TEST(PersistenceErrors, HeaderIsReadableText)
{
    const std::string bytes = serialize(fit_pca(drr::test::gaussian(10, 2, 1)));
    EXPECT_EQ(bytes.rfind("DRRMODEL\nversion 1\nmethod pca\ndim 2\n", 0), 0u);
}

TEST(PersistenceErrors, TruncatedPayloadIsChecksumError)
{
    const std::string bytes = serialize(fit_pca(drr::test::gaussian(10, 3, 1)));
    EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 5)), ChecksumError);
    const auto header_end = bytes.find("end\n");
    EXPECT_THROW(deserialize(bytes.substr(0, header_end)), ChecksumError);
}

TEST(PersistenceErrors, CorruptedPayloadIsChecksumError)
{
    std::string bytes = serialize(fit_pca(drr::test::gaussian(10, 3, 1)));
    bytes[bytes.size() - 3] ^= 0x10;
    EXPECT_THROW(deserialize(bytes), ChecksumError);
}

TEST(PersistenceErrors, NewerVersionIsRejected)
{
    std::string bytes = serialize(fit_pca(drr::test::gaussian(10, 3, 1)));
    bytes.replace(bytes.find("version 1"), 9, "version 2");
    try {
        deserialize(bytes);
        FAIL() << "expected VersionError";
    } catch (const VersionError& e) {
        EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
    }
}

TEST(PersistenceErrors, BadMagicIsFormatError)
{
    EXPECT_THROW(deserialize("not a model\n"), FormatError);
    EXPECT_THROW(deserialize(""), FormatError);
}
