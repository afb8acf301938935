// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <spectool/error.hpp>

#include <gtest/gtest.h>

#define EXPECT_ERRC(statement, errc)                                                                               \
    do                                                                                                             \
    {                                                                                                              \
        try                                                                                                        \
        {                                                                                                          \
            (void)(statement);                                                                                     \
            ADD_FAILURE() << "expected " << ::spectool::to_string(errc) << " from " #statement;                    \
        }                                                                                                          \
        catch (const ::spectool::Error& e)                                                                         \
        {                                                                                                          \
            EXPECT_EQ(e.code(), errc) << e.what();                                                                 \
        }                                                                                                          \
    } while (false)
