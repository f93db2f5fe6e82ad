import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="pysubbotin",
    version="0.3.1",
    description="Subbotin graphical models: Gibbs sampling, Extreme Lasso neighborhood selection and extreme-value graph benchmarks",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests", "examples", "examples.*"]),
    package_data={'pysubbotin': ['constants/defaults.json']},
    install_requires=["numpy>=1.22", "scipy>=1.8", "networkx>=2.6"],
    entry_points={"console_scripts": ["pysubbotin=pysubbotin.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3.8",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
    ],
    python_requires='>=3.8, <3.13',
)
