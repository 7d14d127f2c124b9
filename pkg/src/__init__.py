"""
dupinlab - メビウス・ラゲール不変量によるデュパン超曲面の数値検証ツール
"""

__version__ = "1.0.0"
