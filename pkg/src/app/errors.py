"""
例外定義

dupinlab のすべてのエラーは DupinLabError を基底とし、ErrorCode を保持します。
CLI は ConfigError を終了コード 2、GeometryError を終了コード 3 に対応付けます。
"""

from src.utils.logger_config import ErrorCode


class DupinLabError(Exception):
    """dupinlab 基底例外"""

    error_code: ErrorCode = ErrorCode.SYSTEM_STARTUP_ERROR

    def __init__(self, message: str = "", **details) -> None:
        super().__init__(message or self.__class__.__name__)
        self.details = details

    @property
    def name(self) -> str:
        return self.__class__.__name__


class ConfigError(DupinLabError):
    error_code = ErrorCode.CONFIG_INVALID


class GeometryError(DupinLabError):
    error_code = ErrorCode.GEOMETRY_ERROR


class VerificationError(DupinLabError):
    error_code = ErrorCode.VERIFICATION_ERROR


# --- 設定・構文 ---


class UnknownFamily(ConfigError):
    error_code = ErrorCode.CONFIG_UNKNOWN_FAMILY


class DslError(ConfigError):
    error_code = ErrorCode.DSL_SYNTAX_ERROR


class DslSyntaxError(DslError):
    """DSL 構文エラー（行・列・期待トークン付き）"""

    def __init__(self, message: str, line: int, column: int, expected: str) -> None:
        super().__init__(
            f"{message} at line {line}, column {column} (expected {expected})",
            line=line,
            column=column,
            expected=expected,
        )
        self.line = line
        self.column = column
        self.expected = expected


class ArityError(DslError):
    error_code = ErrorCode.DSL_ARITY_ERROR


class UnknownIdentifier(DslError):
    error_code = ErrorCode.DSL_UNKNOWN_IDENTIFIER


class CloudParseError(ConfigError):
    error_code = ErrorCode.CLOUD_PARSE_ERROR


class FamilyParameterError(ConfigError):
    error_code = ErrorCode.FAMILY_PARAMETER_ERROR


class DegenerateAngle(FamilyParameterError):
    pass


class BadDimensions(FamilyParameterError):
    pass


class BadKappa(FamilyParameterError):
    pass


class PoleProximity(FamilyParameterError):
    pass


# --- 幾何計算 ---


class SignatureMismatch(GeometryError):
    error_code = ErrorCode.SIGNATURE_MISMATCH


class InvalidTransform(GeometryError):
    error_code = ErrorCode.SIGNATURE_MISMATCH


class DimensionMismatch(GeometryError):
    error_code = ErrorCode.DIMENSION_MISMATCH


class OrderOutOfRange(GeometryError):
    error_code = ErrorCode.JET_ORDER_OUT_OF_RANGE


class OrderUnavailable(OrderOutOfRange):
    pass


class DivisionNearZero(GeometryError):
    error_code = ErrorCode.JET_DIVISION_NEAR_ZERO


class DomainError(GeometryError):
    error_code = ErrorCode.JET_DOMAIN_ERROR


class PointOutsideDomain(GeometryError):
    error_code = ErrorCode.POINT_OUTSIDE_DOMAIN


class RankDeficient(GeometryError):
    error_code = ErrorCode.RANK_DEFICIENT


class GroupingAmbiguous(GeometryError):
    error_code = ErrorCode.GROUPING_AMBIGUOUS


class DegenerateDenominator(GeometryError):
    error_code = ErrorCode.DEGENERATE_DENOMINATOR


class MetricNotPositive(GeometryError):
    error_code = ErrorCode.METRIC_NOT_POSITIVE


class FrameMismatch(GeometryError):
    error_code = ErrorCode.DIMENSION_MISMATCH


class UmbilicPoint(GeometryError):
    error_code = ErrorCode.UMBILIC_POINT


class VanishingPrincipalCurvature(GeometryError):
    error_code = ErrorCode.VANISHING_PRINCIPAL_CURVATURE


class PointAtInfinity(GeometryError):
    error_code = ErrorCode.POINT_AT_INFINITY


class SameGroup(GeometryError):
    error_code = ErrorCode.DEGENERATE_DENOMINATOR


# --- 検証 ---


class PatternMismatch(VerificationError):
    error_code = ErrorCode.PATTERN_MISMATCH


class TolAmbiguous(VerificationError):
    error_code = ErrorCode.TOL_AMBIGUOUS


class InvalidCloud(ConfigError):
    error_code = ErrorCode.INVALID_CLOUD
