#pragma once

#include "camplace/cloud_io.hpp"
#include "camplace/environment.hpp"
#include "camplace/error.hpp"
#include "camplace/geometry.hpp"
#include "camplace/optimizers.hpp"
#include "camplace/pointcloud.hpp"
#include "camplace/protocol.hpp"
#include "camplace/report.hpp"
#include "camplace/shadowmap.hpp"
#include "camplace/synthetic.hpp"
