# BaZi engine package
