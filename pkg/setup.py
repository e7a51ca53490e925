#!/usr/bin/env python

"""The setup script."""

from setuptools import setup, find_packages

with open("README.md") as readme_file:
    readme = readme_file.read()

with open("HISTORY.md") as history_file:
    history = history_file.read()

requirements = [
    "pandas>=1.5.0",
    "numpy>=1.22",
    "scipy>=1.12",
    "scikit-learn>=1.1",
    "click>=8.0",
]

test_requirements = []

setup(
    author="vvcb",
    author_email="vvcb.n1@gmail.com",
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Intended Audience :: Developers",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    description="Node-level stability analysis of graph models through graph-based manifolds.",
    entry_points={
        "console_scripts": [
            "stabilipy=stabilipy.cli:main",
        ],
    },
    install_requires=requirements,
    license="MIT license",
    long_description=readme + "\n\n" + history,
    long_description_content_type="text/markdown",
    include_package_data=True,
    keywords="stabilipy graph stability effective resistance spectral sparsification",
    name="stabilipy",
    packages=find_packages(include=["stabilipy", "stabilipy.*"]),
    test_suite="tests",
    tests_require=test_requirements,
    url="https://github.com/vvcb/stabilipy",
    version="0.1.0",
    zip_safe=False,
    maintainer="vvcb",
)
