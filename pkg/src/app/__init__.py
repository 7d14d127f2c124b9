"""
アプリケーションのコアモジュール
"""