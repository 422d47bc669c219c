#!/usr/bin/env python3
from setuptools import find_packages, setup

setup(
    name="chokepoint",
    version="1.0.0",
    description="审查网关模拟器与主动测量探测套件",
    license="MIT",
    python_requires=">=3.8",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    py_modules=["chokepoint"],
    package_data={"src.harness": ["scenarios/*.json"]},
    install_requires=[
        "dnspython>=2.4",
        "pydantic>=2.5",
    ],
    extras_require={
        "test": ["pytest>=7.4"],
    },
    entry_points={
        "console_scripts": [
            "chokepoint=chokepoint:main",
        ],
    },
)
