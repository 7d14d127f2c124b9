"""
ユーティリティモジュール
"""